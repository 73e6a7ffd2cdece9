#include <gtest/gtest.h>

#include "bcam/data.hpp"
#include "bcam/errors.hpp"

using namespace bcam;

TEST(Data, NumericCsv) {
  const auto d = parse_csv("a,b,c\n1,2,3\n4,5.5,-6e-1\n");
  EXPECT_EQ(d.n_rows(), 2u);
  EXPECT_EQ(d.n_cols(), 3u);
  EXPECT_DOUBLE_EQ(d.numeric("c")[1], -0.6);
}

TEST(Data, FactorColumns) {
  const auto d = parse_csv("g,y\na,1\nb,2\na,3\n");
  EXPECT_TRUE(d.column("g").is_factor);
  const auto q = parse_csv("g,y\n\"1\",1\n\"2\",2\n");
  EXPECT_TRUE(q.column("g").is_factor);
  EXPECT_EQ(q.factor("g")[1], "2");
}

TEST(Data, Errors) {
  EXPECT_THROW(parse_csv(""), InputError);
  EXPECT_THROW(parse_csv("a,b\n1,2\n3\n"), InputError);
  EXPECT_THROW(parse_csv("a,b\n1,2\nx,3\n"), InputError);
  try {
    parse_csv("a,b\n1,2\n3,\n");
    FAIL();
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":3"), std::string::npos);
    EXPECT_NE(msg.find("'b'"), std::string::npos);
  }
}

TEST(Data, Subset) {
  const auto d = parse_csv("g,y\na,1\nb,2\nc,3\n");
  const auto s = d.subset({2, 0});
  EXPECT_EQ(s.factor("g")[0], "c");
  EXPECT_EQ(s.numeric("y")[1], 1.0);
}
