#pragma once

#include "enhope/data.hpp"
#include "enhope/embedding.hpp"
#include "enhope/exemplars.hpp"
#include "enhope/objective.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace enhope {

/// Objective callback: returns f(x) and, when `grad` is non-null, writes the gradient.
using ObjectiveFn = std::function<double(const Vector& x, Vector* grad)>;

/// One accepted line-search step.
struct StepRecord {
    double f_before = 0.0;
    double f_after = 0.0;
    double alpha = 0.0;
    double slope = 0.0;     ///< <grad, direction> at the start point
    bool fallback = false;  ///< line search gave up and took the fixed tiny step
    bool restarted = false; ///< direction was reset to steepest descent
};

struct CgConfig {
    int max_epochs = 100;
    std::size_t batch_size = 5000;
    int cg_steps_per_batch = 3;
    double armijo_c1 = 1e-4;
    double shrink = 0.5;
    int restart_interval = 20;
    int max_shrinks = 40;
    double fallback_step = 1e-12;
    std::uint64_t seed = 0;
    int patience = 0;  ///< epochs without validation improvement before stopping; 0 disables
    int k = 0;         ///< validation kNN k; 0 selects default_k(z)
    Backend backend = Backend::parallel;
    std::ostream* log = nullptr;                       ///< progress lines go here
    std::function<void(const StepRecord&)> on_step;  ///< observer for every accepted step

    void validate() const;
};

/// Polak-Ribiere+ nonlinear conjugate gradient with an Armijo backtracking
/// line search. The first trial step is refined by quadratic interpolation,
/// which makes the search exact on quadratic objectives.
class ConjugateGradient {
public:
    explicit ConjugateGradient(const CgConfig& cfg) : cfg_(cfg) {}

    /// Forget the search direction (next step is steepest descent).
    void reset() { started_ = false; }

    /// Takes one step from x, updating it in place. Returns f at the new point.
    StepRecord step(const ObjectiveFn& fn, Vector& x);

    double value() const { return f_; }
    const Vector& gradient() const { return grad_; }

private:
    CgConfig cfg_;
    bool started_ = false;
    double f_ = 0.0;
    Vector grad_, dir_;
    double prev_alpha_ = 0.0;
    double prev_slope_ = 0.0;
    int since_restart_ = 0;
};

struct MinimizeResult {
    int iterations = 0;
    double value = 0.0;
    double grad_norm = 0.0;
};

/// Runs CG steps until the gradient norm drops to `grad_tolerance` or
/// `max_iters` steps have been taken.
MinimizeResult minimize(const ObjectiveFn& fn, Vector& x, const CgConfig& cfg, int max_iters, double grad_tolerance);

enum class LossMode { pairwise, exemplar };

struct TrainOptions {
    LossMode mode = LossMode::exemplar;
    bool learn_exemplars = false;
    PairKernel kernel = PairKernel::student_t;
    ExemplarNormalization normalization = ExemplarNormalization::global;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;       ///< mean over the epoch's batches, after their steps
    double val_error = 0.0;  ///< NaN without a validation set
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int selected_epoch = 0;  ///< epoch whose snapshot was returned (0 = initial model)
    std::size_t steps = 0;
    std::size_t fallback_steps = 0;
    std::size_t batches_per_epoch = 0;
};

struct TrainResult {
    EmbeddingModel model;
    ExemplarSet exemplars;
    TrainReport report;
};

/// Trains on `ds.subset(split.train)` (features already normalized), scoring
/// every epoch by kNN error on `split.validation`, and returns the snapshot
/// with the lowest validation error (earliest on ties).
TrainResult train(EmbeddingModel model, const Dataset& ds, const Split& split, ExemplarSet exemplars,
                  const TrainOptions& options, const CgConfig& cfg);

/// kNN error of `val` against embedded `references` (exemplars, or the
/// training points themselves for pairwise models).
double evaluate_validation(const EmbeddingModel& model, const ExemplarSet& references, const Matrix& val,
                           const Labels& val_labels, int k, Backend backend = Backend::parallel);

} // namespace enhope
