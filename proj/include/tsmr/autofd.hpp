#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "tsmr/qd.hpp"

namespace tsmr {

// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns
// eigenvalues in descending order with matching eigenvector columns.
struct EigenDecomposition {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors; // vectors[k] = k-th eigenvector
};
EigenDecomposition jacobi_eigen_symmetric(const std::vector<std::vector<double>>& matrix);

// Per-column mean/std scaler. Constant columns map to zero rather than NaN.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev; // sample std (n-1)

    void fit(const std::vector<std::vector<double>>& rows);
    std::vector<double> apply(std::span<const double> row) const;
    bool fitted() const { return !mean.empty(); }
};

// Two leading principal axes of the standardized data. Axis signs are fixed
// by making the largest-magnitude loading positive.
struct PcaModel {
    std::vector<double> axis1, axis2;
    double variance1 = 0.0, variance2 = 0.0;

    std::array<double, 2> project(std::span<const double> standardized_row) const;
    bool fitted() const { return !axis1.empty(); }
};

// Equal-width bins over [lo, hi]. Values exactly on an interior boundary go
// to the upper bin; the top edge maps into the last bin.
struct ComponentBounds {
    double lo = 0.0;
    double hi = 0.0;
    int bins = 0;

    bool in_bounds(double v) const { return v >= lo && v <= hi; }
    int bin_of(double v) const; // -1 when out of bounds
    int clamped_bin_of(double v) const;
};

// Controller feature descriptor: standardize the sensory vector, project on
// two principal axes, discretize with adaptive equal-width bounds. Refits
// follow a fixed generation schedule; out-of-bounds projections trigger a
// bounds recomputation over the archive occupants plus the new solutions.
class FeatureProjector {
public:
    FeatureProjector(std::vector<int> fd_dims, std::vector<int> fit_schedule);

    bool fitted() const { return pca_.fitted(); }
    // True when `generation` is a scheduled refit point (generation 0 is the
    // initial fit and is consumed by the not-fitted branch).
    bool is_fit_time(int generation) const;

    // Standardizer refit, fresh axes, bounds spanning the fitting data.
    // Throws StructuralError on fewer than 3 rows.
    void fit(const std::vector<std::vector<double>>& sensory_rows);

    std::array<double, 2> project_values(std::span<const double> sensory) const;
    // nullopt signals out-of-bounds; callers must recompute bounds rather
    // than clamp during evolution.
    std::optional<FeatureDescriptor> project(const Solution& solution) const;
    FeatureDescriptor project_or_throw(const Solution& solution) const;
    // Offline use (double-to-single analysis): clamp to the edge bins and
    // report whether clamping happened.
    FeatureDescriptor project_clamped(const Solution& solution, bool* out_of_bounds) const;

    // New bounds spanning the projections of the archive occupants plus the
    // given solutions; axes unchanged.
    void recompute_bounds(const Archive& archive, const std::vector<Solution>& new_solutions);

    const std::vector<int>& fd_dims() const { return fd_dims_; }
    const std::vector<int>& schedule() const { return schedule_; }
    const Standardizer& standardizer() const { return standardizer_; }
    const PcaModel& pca() const { return pca_; }
    const std::array<ComponentBounds, 2>& bounds() const { return bounds_; }

    // Snapshot restore (bench-side persistence).
    void restore(Standardizer s, PcaModel p, std::array<ComponentBounds, 2> b);

private:
    std::vector<int> fd_dims_; // {9, 10}
    std::vector<int> schedule_;
    Standardizer standardizer_;
    PcaModel pca_;
    std::array<ComponentBounds, 2> bounds_{};
};

// Rebuilds the archive by re-adding every occupant (ascending previous cell
// order) under a fresh feature mapping. Colliding occupants keep the fitter.
Archive reinsert(const Archive& archive,
                 const std::function<FeatureDescriptor(const Solution&)>& fd_of);

// Scheduled refit: when due, fits the projector on the archive occupants'
// sensory data and reinserts them. Returns true when a refit happened.
bool maybe_refit(FeatureProjector& projector, int generation, Archive& archive,
                 const std::function<FeatureDescriptor(const Solution&)>& fd_of);

} // namespace tsmr
