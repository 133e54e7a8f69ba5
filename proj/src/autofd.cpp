#include "tsmr/autofd.hpp"

#include <algorithm>
#include <cmath>

#include "tsmr/errors.hpp"

namespace tsmr {

EigenDecomposition jacobi_eigen_symmetric(const std::vector<std::vector<double>>& matrix) {
    const std::size_t n = matrix.size();
    for (const auto& row : matrix)
        if (row.size() != n) throw StructuralError("jacobi: matrix not square");

    std::vector<std::vector<double>> a = matrix;
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    auto off_diagonal_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += a[i][j] * a[i][j];
        return std::sqrt(2.0 * s);
    };

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::fabs(a[i][j]));
    const double tol = std::max(1e-300, scale) * 1e-14 * static_cast<double>(n);

    for (int sweep = 0; sweep < 64 && off_diagonal_norm() > tol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p][q];
                if (std::fabs(apq) <= tol / static_cast<double>(n)) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });

    EigenDecomposition out;
    out.values.reserve(n);
    out.vectors.reserve(n);
    for (std::size_t k : order) {
        out.values.push_back(a[k][k]);
        std::vector<double> vec(n);
        for (std::size_t i = 0; i < n; ++i) vec[i] = v[i][k];
        out.vectors.push_back(std::move(vec));
    }
    return out;
}

void Standardizer::fit(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    if (n < 2) throw StructuralError("standardizer needs at least 2 rows");
    const std::size_t d = rows[0].size();
    mean.assign(d, 0.0);
    stddev.assign(d, 0.0);
    for (const auto& row : rows) {
        if (row.size() != d) throw StructuralError("ragged sensory matrix");
        for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (const auto& row : rows)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = row[j] - mean[j];
            stddev[j] += c * c;
        }
    for (double& s : stddev) s = std::sqrt(s / static_cast<double>(n - 1));
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
    if (row.size() != mean.size()) throw StructuralError("standardizer dimension mismatch");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
        out[j] = stddev[j] > 0.0 ? (row[j] - mean[j]) / stddev[j] : 0.0;
    return out;
}

std::array<double, 2> PcaModel::project(std::span<const double> standardized_row) const {
    if (standardized_row.size() != axis1.size())
        throw StructuralError("pca dimension mismatch");
    double p1 = 0.0, p2 = 0.0;
    for (std::size_t j = 0; j < axis1.size(); ++j) {
        p1 += axis1[j] * standardized_row[j];
        p2 += axis2[j] * standardized_row[j];
    }
    return {p1, p2};
}

int ComponentBounds::bin_of(double v) const {
    if (!in_bounds(v)) return -1;
    const double width = (hi - lo) / bins;
    int idx = static_cast<int>(std::floor((v - lo) / width));
    if (idx >= bins) idx = bins - 1; // v == hi
    if (idx < 0) idx = 0;
    return idx;
}

int ComponentBounds::clamped_bin_of(double v) const {
    if (v <= lo) return 0;
    if (v >= hi) return bins - 1;
    return bin_of(v);
}

FeatureProjector::FeatureProjector(std::vector<int> fd_dims, std::vector<int> fit_schedule)
    : fd_dims_(std::move(fd_dims)), schedule_(std::move(fit_schedule)) {
    if (fd_dims_.size() != 2) throw StructuralError("controller FD must have 2 dimensions");
}

bool FeatureProjector::is_fit_time(int generation) const {
    return generation > 0 &&
           std::find(schedule_.begin(), schedule_.end(), generation) != schedule_.end();
}

namespace {

void fix_axis_sign(std::vector<double>& axis) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < axis.size(); ++j)
        if (std::fabs(axis[j]) > std::fabs(axis[arg])) arg = j;
    if (axis[arg] < 0.0)
        for (double& x : axis) x = -x;
}

} // namespace

void FeatureProjector::fit(const std::vector<std::vector<double>>& sensory_rows) {
    const std::size_t n = sensory_rows.size();
    if (n < 3) throw StructuralError("projector fit needs at least 3 rows");
    standardizer_.fit(sensory_rows);

    const std::size_t d = sensory_rows[0].size();
    std::vector<std::vector<double>> standardized;
    standardized.reserve(n);
    for (const auto& row : sensory_rows) standardized.push_back(standardizer_.apply(row));

    // Covariance of the standardized data, X^T X / (n - 1).
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& row : standardized)
        for (std::size_t i = 0; i < d; ++i) {
            if (row[i] == 0.0) continue;
            for (std::size_t j = i; j < d; ++j) cov[i][j] += row[i] * row[j];
        }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov[i][j] /= static_cast<double>(n - 1);
            cov[j][i] = cov[i][j];
        }

    const EigenDecomposition eig = jacobi_eigen_symmetric(cov);
    pca_.axis1 = eig.vectors[0];
    pca_.axis2 = eig.vectors[1];
    pca_.variance1 = eig.values[0];
    pca_.variance2 = eig.values[1];
    fix_axis_sign(pca_.axis1);
    fix_axis_sign(pca_.axis2);

    // Bin boundaries spanning the projected fitting data.
    std::array<double, 2> lo{1e300, 1e300}, hi{-1e300, -1e300};
    for (const auto& row : standardized) {
        const auto p = pca_.project(row);
        for (int c = 0; c < 2; ++c) {
            lo[static_cast<std::size_t>(c)] = std::min(lo[static_cast<std::size_t>(c)], p[static_cast<std::size_t>(c)]);
            hi[static_cast<std::size_t>(c)] = std::max(hi[static_cast<std::size_t>(c)], p[static_cast<std::size_t>(c)]);
        }
    }
    for (int c = 0; c < 2; ++c) {
        auto& b = bounds_[static_cast<std::size_t>(c)];
        b.lo = lo[static_cast<std::size_t>(c)];
        b.hi = hi[static_cast<std::size_t>(c)];
        b.bins = fd_dims_[static_cast<std::size_t>(c)];
        if (b.hi - b.lo < 1e-12) { // degenerate fit data
            b.lo -= 0.5;
            b.hi += 0.5;
        }
    }
}

std::array<double, 2> FeatureProjector::project_values(std::span<const double> sensory) const {
    if (!fitted()) throw StructuralError("projector not fitted");
    return pca_.project(standardizer_.apply(sensory));
}

std::optional<FeatureDescriptor> FeatureProjector::project(const Solution& solution) const {
    const auto p = project_values(solution.sensory);
    const int b1 = bounds_[0].bin_of(p[0]);
    const int b2 = bounds_[1].bin_of(p[1]);
    if (b1 < 0 || b2 < 0) return std::nullopt;
    return FeatureDescriptor{b1, b2};
}

FeatureDescriptor FeatureProjector::project_or_throw(const Solution& solution) const {
    auto fd = project(solution);
    if (!fd) throw StructuralError("projection out of bounds");
    return *fd;
}

FeatureDescriptor FeatureProjector::project_clamped(const Solution& solution,
                                                    bool* out_of_bounds) const {
    const auto p = project_values(solution.sensory);
    if (out_of_bounds)
        *out_of_bounds = !bounds_[0].in_bounds(p[0]) || !bounds_[1].in_bounds(p[1]);
    return {bounds_[0].clamped_bin_of(p[0]), bounds_[1].clamped_bin_of(p[1])};
}

void FeatureProjector::recompute_bounds(const Archive& archive,
                                        const std::vector<Solution>& new_solutions) {
    if (!fitted()) throw StructuralError("recompute_bounds before fit");
    std::array<double, 2> lo{1e300, 1e300}, hi{-1e300, -1e300};
    auto absorb = [&](const Solution& s) {
        const auto p = project_values(s.sensory);
        for (int c = 0; c < 2; ++c) {
            lo[static_cast<std::size_t>(c)] = std::min(lo[static_cast<std::size_t>(c)], p[static_cast<std::size_t>(c)]);
            hi[static_cast<std::size_t>(c)] = std::max(hi[static_cast<std::size_t>(c)], p[static_cast<std::size_t>(c)]);
        }
    };
    for (const auto& [fd, sol] : archive.cells()) absorb(sol);
    for (const auto& s : new_solutions) absorb(s);
    if (lo[0] > hi[0]) throw StructuralError("recompute_bounds over empty data");
    for (int c = 0; c < 2; ++c) {
        auto& b = bounds_[static_cast<std::size_t>(c)];
        b.lo = lo[static_cast<std::size_t>(c)];
        b.hi = hi[static_cast<std::size_t>(c)];
        if (b.hi - b.lo < 1e-12) {
            b.lo -= 0.5;
            b.hi += 0.5;
        }
    }
}

void FeatureProjector::restore(Standardizer s, PcaModel p, std::array<ComponentBounds, 2> b) {
    standardizer_ = std::move(s);
    pca_ = std::move(p);
    bounds_ = b;
}

Archive reinsert(const Archive& archive,
                 const std::function<FeatureDescriptor(const Solution&)>& fd_of) {
    Archive fresh(archive.dims());
    for (const auto& [fd, sol] : archive.cells()) // std::map: ascending cell order
        fresh.add(fd_of(sol), sol);
    return fresh;
}

bool maybe_refit(FeatureProjector& projector, int generation, Archive& archive,
                 const std::function<FeatureDescriptor(const Solution&)>& fd_of) {
    if (!projector.is_fit_time(generation)) return false;
    std::vector<std::vector<double>> rows;
    rows.reserve(archive.size());
    for (const auto& [fd, sol] : archive.cells()) rows.push_back(sol.sensory);
    projector.fit(rows);
    archive = reinsert(archive, fd_of);
    return true;
}

} // namespace tsmr
