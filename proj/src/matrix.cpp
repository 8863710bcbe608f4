#include "blfmrac/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blfmrac/errors.hpp"

namespace blfmrac {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* op) {
    if (a != b) {
        fail(ErrorKind::InvalidInput, std::string(op) + ": dimension mismatch (" +
                                          std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        fail(ErrorKind::InvalidInput,
             std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                 std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                 std::to_string(b.cols()) + ")");
    }
}

}  // namespace

// ---- Vector ---------------------------------------------------------------

double Vector::dot(const Vector& other) const {
    require_same_size(size(), other.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) s += data_[i] * other.data_[i];
    return s;
}

double Vector::norm() const {
    // Scaled accumulation keeps tiny and huge entries from under/overflowing.
    double scale = 0.0;
    for (double v : data_) scale = std::max(scale, std::abs(v));
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    double s = 0.0;
    for (double v : data_) {
        const double r = v / scale;
        s += r * r;
    }
    return scale * std::sqrt(s);
}

bool Vector::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Vector& Vector::operator+=(const Vector& rhs) {
    require_same_size(size(), rhs.size(), "vector +");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

Vector& Vector::operator-=(const Vector& rhs) {
    require_same_size(size(), rhs.size(), "vector -");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

Vector& Vector::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Vector operator+(Vector lhs, const Vector& rhs) { return lhs += rhs; }
Vector operator-(Vector lhs, const Vector& rhs) { return lhs -= rhs; }
Vector operator-(Vector v) { return v *= -1.0; }
Vector operator*(double s, Vector v) { return v *= s; }

// ---- Matrix ---------------------------------------------------------------

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != cols_) {
            fail(ErrorKind::InvalidInput, "matrix literal: row " + std::to_string(r) +
                                              " has " + std::to_string(row.size()) +
                                              " entries, expected " + std::to_string(cols_));
        }
        data_.insert(data_.end(), row.begin(), row.end());
        ++r;
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

Matrix Matrix::from_row_major(std::size_t rows, std::size_t cols, std::vector<double> entries) {
    if (entries.size() != rows * cols) {
        fail(ErrorKind::InvalidInput, "from_row_major: " + std::to_string(entries.size()) +
                                          " entries for " + std::to_string(rows) + "x" +
                                          std::to_string(cols));
    }
    Matrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(entries);
    return m;
}

Matrix Matrix::column(const Vector& v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

Vector Matrix::row(std::size_t r) const {
    return Vector(std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
                                      data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_)));
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double Matrix::trace() const {
    if (!is_square()) fail(ErrorKind::InvalidInput, "trace of non-square matrix");
    double s = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) s += (*this)(i, i);
    return s;
}

double Matrix::frobenius_norm() const { return Vector(data_).norm(); }

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& rhs) {
    require_same_shape(*this, rhs, "matrix +");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& rhs) {
    require_same_shape(*this, rhs, "matrix -");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
Matrix operator-(Matrix m) { return m *= -1.0; }
Matrix operator*(double s, Matrix m) { return m *= s; }

Matrix operator*(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.cols() != rhs.rows()) {
        fail(ErrorKind::InvalidInput,
             "matrix product: inner dimensions " + std::to_string(lhs.cols()) + " and " +
                 std::to_string(rhs.rows()) + " differ");
    }
    Matrix out(lhs.rows(), rhs.cols());
    for (std::size_t i = 0; i < lhs.rows(); ++i)
        for (std::size_t k = 0; k < lhs.cols(); ++k) {
            const double a = lhs(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < rhs.cols(); ++j) out(i, j) += a * rhs(k, j);
        }
    return out;
}

Vector operator*(const Matrix& lhs, const Vector& rhs) {
    if (lhs.cols() != rhs.size()) {
        fail(ErrorKind::InvalidInput, "matrix-vector product: " + std::to_string(lhs.cols()) +
                                          " columns vs vector of " + std::to_string(rhs.size()));
    }
    Vector out(lhs.rows());
    for (std::size_t i = 0; i < lhs.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < lhs.cols(); ++j) s += lhs(i, j) * rhs[j];
        out[i] = s;
    }
    return out;
}

Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

double quad_form(const Vector& v, const Matrix& w) { return v.dot(w * v); }

double frobenius_inner(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "frobenius_inner");
    double s = 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
    return s;
}

// ---- errors ---------------------------------------------------------------

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::NumericalFailure: return "numerical-failure";
        case ErrorKind::InfeasibleModel: return "infeasible-model";
        case ErrorKind::BarrierBreach: return "barrier-breach";
        case ErrorKind::InfeasibleC1: return "infeasible-c1";
        case ErrorKind::InfeasibleC2: return "infeasible-c2";
        case ErrorKind::DisturbanceMargin: return "disturbance-margin";
        case ErrorKind::StepFailure: return "step-failure";
        case ErrorKind::InvalidScenario: return "invalid-scenario";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Validation: return "validation";
    }
    return "unknown";
}

}  // namespace blfmrac
