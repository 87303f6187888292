#include "cabs/matrix.hpp"

#include <gtest/gtest.h>

namespace {

using cabs::Matrix;

TEST(Matrix, MatmulSmall) {
  Matrix a(2, 3);
  Matrix b(3, 2);
  // a = [1 2 3; 4 5 6], b = [7 8; 9 10; 11 12]
  a.data = {1, 2, 3, 4, 5, 6};
  b.data = {7, 8, 9, 10, 11, 12};
  const Matrix c = cabs::matmul(a, b);
  ASSERT_EQ(c.rows, 2u);
  ASSERT_EQ(c.cols, 2u);
  EXPECT_DOUBLE_EQ(c(0, 0), 58.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 64.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 139.0);
  EXPECT_DOUBLE_EQ(c(1, 1), 154.0);
}

TEST(Matrix, TransposedVariantsAgreeWithExplicitTranspose) {
  Matrix a(4, 3), b(4, 2);
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] = 0.5 * double(i) - 2.0;
  for (std::size_t i = 0; i < b.size(); ++i) b.data[i] = 0.25 * double(i) + 1.0;
  Matrix at(3, 4);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) at(j, i) = a(i, j);
  }
  const Matrix via_tn = cabs::matmul_tn(a, b);
  const Matrix direct = cabs::matmul(at, b);
  ASSERT_EQ(via_tn.size(), direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    EXPECT_DOUBLE_EQ(via_tn.data[i], direct.data[i]);
  }

  Matrix bt(2, 4);
  for (std::size_t i = 0; i < b.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) bt(j, i) = b(i, j);
  }
  const Matrix via_nt = cabs::matmul_nt(at, bt);  // a^T * b == a^T * (b^T)^T
  for (std::size_t i = 0; i < direct.size(); ++i) {
    EXPECT_DOUBLE_EQ(via_nt.data[i], direct.data[i]);
  }
}

TEST(Matrix, ShapeMismatchThrows) {
  Matrix a(2, 3), b(2, 2);
  EXPECT_THROW(cabs::matmul(a, b), std::invalid_argument);
  Matrix c(3, 3);
  EXPECT_THROW(cabs::matmul_tn(a, c), std::invalid_argument);
}

}  // namespace
