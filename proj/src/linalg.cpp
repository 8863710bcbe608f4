#include "blfmrac/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "blfmrac/errors.hpp"
#include "blfmrac/tolerances.hpp"

namespace blfmrac {

namespace {

void require_finite(const Matrix& a, const char* op) {
    if (!a.all_finite()) fail(ErrorKind::InvalidInput, std::string(op) + ": non-finite entry");
}

void require_square(const Matrix& a, const char* op) {
    if (a.empty() || !a.is_square()) {
        fail(ErrorKind::InvalidInput, std::string(op) + ": expected a nonempty square matrix, got " +
                                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
}

// Dense LU with partial pivoting, factored in place.
struct LuFactors {
    Matrix lu;
    std::vector<std::size_t> pivot;
};

LuFactors lu_factor(Matrix a) {
    const std::size_t n = a.rows();
    std::vector<std::size_t> pivot(n);
    const double scale = std::max(a.max_abs(), 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > best) {
                best = std::abs(a(i, k));
                p = i;
            }
        }
        if (best <= tol::kPivotFloor * scale) {
            fail(ErrorKind::NumericalFailure,
                 "LU: matrix is singular to working precision (pivot " + std::to_string(k) + ")");
        }
        pivot[k] = p;
        if (p != k)
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
        const double inv = 1.0 / a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) * inv;
            a(i, k) = f;
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
        }
    }
    return {std::move(a), std::move(pivot)};
}

std::vector<double> lu_solve(const LuFactors& f, std::vector<double> b) {
    const std::size_t n = f.lu.rows();
    for (std::size_t k = 0; k < n; ++k) std::swap(b[k], b[f.pivot[k]]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) b[i] -= f.lu(i, j) * b[j];
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) b[i] -= f.lu(i, j) * b[j];
        b[i] /= f.lu(i, i);
    }
    return b;
}

// Cyclic Jacobi; returns the diagonalised copy.
Matrix jacobi_diagonalise(Matrix a) {
    const std::size_t n = a.rows();
    const double total = a.frobenius_norm();
    if (total == 0.0) return a;
    for (int sweep = 0; sweep < tol::kJacobiMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= tol::kJacobiOffDiagonal * total * total) return a;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
            }
        }
    }
    fail(ErrorKind::NumericalFailure, "Jacobi eigen-solver did not converge");
}

void hessenberg_reduce(Matrix& a) {
    const std::size_t n = a.rows();
    if (n < 3) return;
    std::vector<double> v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double norm = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) norm = std::hypot(norm, a(i, k));
        if (norm == 0.0) continue;
        const double alpha = a(k + 1, k) > 0.0 ? -norm : norm;
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t i = k + 1; i < n; ++i) v[i] = a(i, k);
        v[k + 1] -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) continue;
        // H = I - 2 v vᵀ / (vᵀv); apply from the left, then the right.
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) s += v[i] * a(i, j);
            s *= 2.0 / vnorm2;
            for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
            s *= 2.0 / vnorm2;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * v[j];
        }
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

double sign_of(double magnitude, double sign_source) {
    return sign_source >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude);
}

// Francis double-shift QR on an upper Hessenberg matrix (destroys `a`).
std::vector<std::complex<double>> hessenberg_qr(Matrix& a) {
    const int n = static_cast<int>(a.rows());
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));

    int nn = n - 1;
    double t = 0.0;
    while (nn >= 0) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 1; --l) {
                double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(a(l, l - 1)) + s == s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            double x = a(nn, nn);
            if (l == nn) {
                out[static_cast<std::size_t>(nn)] = {x + t, 0.0};
                --nn;
            } else {
                double y = a(nn - 1, nn - 1);
                double w = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    const double p = 0.5 * (y - x);
                    const double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign_of(z, p);
                        const double hi = x + z;
                        const double lo = z != 0.0 ? x - w / z : hi;
                        out[static_cast<std::size_t>(nn - 1)] = {hi, 0.0};
                        out[static_cast<std::size_t>(nn)] = {lo, 0.0};
                    } else {
                        out[static_cast<std::size_t>(nn - 1)] = {x + p, z};
                        out[static_cast<std::size_t>(nn)] = {x + p, -z};
                    }
                    nn -= 2;
                } else {
                    if (its == tol::kQrMaxIterationsPerEigenvalue) {
                        fail(ErrorKind::NumericalFailure,
                             "shifted QR did not converge for eigenvalue index " + std::to_string(nn));
                    }
                    if (its == 10 || its == 20) {
                        t += x;
                        for (int i = 0; i <= nn; ++i) a(i, i) -= x;
                        const double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
                        x = y = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    int m = nn - 2;
                    double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
                    for (; m >= l; --m) {
                        z = a(m, m);
                        r = x - z;
                        double s = y - z;
                        p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - r - s;
                        r = a(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v =
                            std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
                        if (u + v == v) break;
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        a(i, i - 2) = 0.0;
                        if (i != m + 2) a(i, i - 3) = 0.0;
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = 0.0;
                            if (k != nn - 1) r = a(k + 2, k - 1);
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        const double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
                        if (s != 0.0) {
                            if (k == m) {
                                if (l != m) a(k, k - 1) = -a(k, k - 1);
                            } else {
                                a(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for (int j = k; j <= nn; ++j) {
                                p = a(k, j) + q * a(k + 1, j);
                                if (k != nn - 1) {
                                    p += r * a(k + 2, j);
                                    a(k + 2, j) -= p * z;
                                }
                                a(k + 1, j) -= p * y;
                                a(k, j) -= p * x;
                            }
                            const int mmin = nn < k + 3 ? nn : k + 3;
                            for (int i = l; i <= mmin; ++i) {
                                p = x * a(i, k) + y * a(i, k + 1);
                                if (k != nn - 1) {
                                    p += z * a(i, k + 2);
                                    a(i, k + 2) -= p * r;
                                }
                                a(i, k + 1) -= p * q;
                                a(i, k) -= p;
                            }
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }
    return out;
}

}  // namespace

bool is_symmetric(const Matrix& s) {
    if (!s.is_square()) return false;
    const double scale = std::max(1.0, s.max_abs());
    for (std::size_t i = 0; i < s.rows(); ++i)
        for (std::size_t j = i + 1; j < s.cols(); ++j)
            if (std::abs(s(i, j) - s(j, i)) > tol::kSymmetry * scale) return false;
    return true;
}

double spectral_norm(const Matrix& a) {
    if (a.empty()) fail(ErrorKind::InvalidInput, "spectral_norm: empty matrix");
    require_finite(a, "spectral_norm");
    const Matrix gram = a.transpose() * a;
    const auto ev = symmetric_eigenvalues(gram);
    return std::sqrt(std::max(0.0, ev.back()));
}

std::vector<double> symmetric_eigenvalues(const Matrix& s) {
    require_square(s, "symmetric_eigenvalues");
    require_finite(s, "symmetric_eigenvalues");
    if (!is_symmetric(s)) fail(ErrorKind::InvalidInput, "symmetric_eigenvalues: matrix is not symmetric");
    const Matrix d = jacobi_diagonalise(s);
    std::vector<double> ev(s.rows());
    for (std::size_t i = 0; i < s.rows(); ++i) ev[i] = d(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

EigExtremes symmetric_eig_extremes(const Matrix& s) {
    const auto ev = symmetric_eigenvalues(s);
    return {ev.front(), ev.back()};
}

std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
    require_square(a, "eigenvalues");
    require_finite(a, "eigenvalues");
    if (a.rows() > 16) fail(ErrorKind::InvalidInput, "eigenvalues: dimension above 16 is not supported");
    Matrix h = a;
    hessenberg_reduce(h);
    return hessenberg_qr(h);
}

double max_real_eigenpart(const Matrix& a) {
    const auto ev = eigenvalues(a);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& z : ev) best = std::max(best, z.real());
    return best;
}

bool is_hurwitz(const Matrix& a) { return max_real_eigenpart(a) < 0.0; }

double lyapunov_residual(const Matrix& ar, const Matrix& p, const Matrix& q) {
    return spectral_norm(ar.transpose() * p + p * ar + q);
}

Matrix solve_lyapunov(const Matrix& ar, const Matrix& q) {
    require_square(ar, "solve_lyapunov");
    require_square(q, "solve_lyapunov");
    if (ar.rows() != q.rows()) fail(ErrorKind::InvalidInput, "solve_lyapunov: Ar and Q differ in size");
    if (!is_hurwitz(ar)) fail(ErrorKind::InfeasibleModel, "solve_lyapunov: Ar is not Hurwitz");
    if (!is_symmetric(q) || symmetric_eig_extremes(q).lambda_min <= 0.0) {
        fail(ErrorKind::InvalidInput, "solve_lyapunov: Q is not symmetric positive definite");
    }

    const std::size_t n = ar.rows();
    const std::size_t nn = n * n;
    // Row (i,j) of Arᵀ P + P Ar: Σ_k Ar(k,i) P(k,j) + Σ_k P(i,k) Ar(k,j).
    Matrix kron(nn, nn);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t row = i * n + j;
            for (std::size_t k = 0; k < n; ++k) {
                kron(row, k * n + j) += ar(k, i);
                kron(row, i * n + k) += ar(k, j);
            }
        }
    std::vector<double> rhs(nn);
    for (std::size_t i = 0; i < nn; ++i) rhs[i] = -q.values()[i];

    const LuFactors lu = lu_factor(kron);
    std::vector<double> x = lu_solve(lu, rhs);
    // One step of iterative refinement.
    std::vector<double> resid(nn);
    for (std::size_t i = 0; i < nn; ++i) {
        double s = rhs[i];
        for (std::size_t j = 0; j < nn; ++j) s -= kron(i, j) * x[j];
        resid[i] = s;
    }
    const std::vector<double> dx = lu_solve(lu, resid);
    for (std::size_t i = 0; i < nn; ++i) x[i] += dx[i];

    Matrix p = Matrix::from_row_major(n, n, std::move(x));
    p = 0.5 * (p + p.transpose());
    if (!p.all_finite() || symmetric_eig_extremes(p).lambda_min <= 0.0) {
        fail(ErrorKind::NumericalFailure, "solve_lyapunov: solution is not positive definite");
    }
    return p;
}

Matrix solve(const Matrix& a, const Matrix& b) {
    require_square(a, "solve");
    require_finite(a, "solve");
    if (b.rows() != a.rows()) fail(ErrorKind::InvalidInput, "solve: right-hand side row count mismatch");
    const LuFactors lu = lu_factor(a);
    Matrix x(b.rows(), b.cols());
    std::vector<double> col(b.rows());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t r = 0; r < b.rows(); ++r) col[r] = b(r, c);
        const auto sol = lu_solve(lu, col);
        for (std::size_t r = 0; r < b.rows(); ++r) x(r, c) = sol[r];
    }
    return x;
}

Matrix inverse(const Matrix& a) { return solve(a, Matrix::identity(a.rows())); }

Matrix left_pseudo_inverse(const Matrix& b) {
    if (b.empty()) fail(ErrorKind::InvalidInput, "left_pseudo_inverse: empty matrix");
    require_finite(b, "left_pseudo_inverse");
    const Matrix bt = b.transpose();
    const Matrix gram = bt * b;
    if (symmetric_eig_extremes(gram).lambda_min <= tol::kRankFloor) {
        fail(ErrorKind::InvalidInput, "left_pseudo_inverse: matrix does not have full column rank");
    }
    return solve(gram, bt);
}

}  // namespace blfmrac
