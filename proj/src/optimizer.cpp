#include "enhope/optimizer.hpp"

#include "enhope/error.hpp"
#include "enhope/knn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace enhope {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Largest factor by which the interpolated step may exceed the trial step.
constexpr double kMaxExtrapolation = 1e4;

} // namespace

void CgConfig::validate() const {
    if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw Error(ErrorKind::config, "Armijo constant must lie in (0, 1)");
    if (!(shrink > 0.0 && shrink < 1.0)) throw Error(ErrorKind::config, "line-search shrink factor must lie in (0, 1)");
    if (batch_size < 2) throw Error(ErrorKind::config, "batch size must be at least 2");
    if (max_epochs < 0 || cg_steps_per_batch < 1 || restart_interval < 1 || max_shrinks < 1) {
        throw Error(ErrorKind::config, "optimizer counts must be positive");
    }
}

StepRecord ConjugateGradient::step(const ObjectiveFn& fn, Vector& x) {
    StepRecord rec;
    if (!started_) {
        f_ = fn(x, &grad_);
        if (!std::isfinite(f_)) throw Error(ErrorKind::numeric, "objective is not finite at the starting point");
        dir_ = -grad_;
        since_restart_ = 0;
        prev_alpha_ = 0.0;
        started_ = true;
        rec.restarted = true;
    }

    double slope = grad_.dot(dir_);
    if (!(slope < 0.0)) {
        dir_ = -grad_;
        slope = -grad_.squaredNorm();
        since_restart_ = 0;
        rec.restarted = true;
    }
    rec.f_before = f_;
    rec.f_after = f_;
    rec.slope = slope;
    if (slope == 0.0) return rec;  // stationary point

    auto trial = [&](double a) {
        Vector xt = x + a * dir_;
        double v;
        try {
            v = fn(xt, nullptr);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numeric) throw;
            v = kInf;
        }
        return std::isfinite(v) ? v : kInf;
    };
    auto armijo = [&](double a, double v) { return v <= f_ + cfg_.armijo_c1 * a * slope; };

    double alpha0 = prev_alpha_ > 0.0 ? prev_alpha_ * prev_slope_ / slope
                                      : std::min(1.0, 1.0 / std::sqrt(-slope));
    double best_alpha = 0.0;
    double best_f = kInf;
    const double f0 = trial(alpha0);
    if (armijo(alpha0, f0)) {
        best_alpha = alpha0;
        best_f = f0;
    }

    // Minimizer of the quadratic through f(0), f'(0) and f(alpha0).
    double interpolated = 0.0;
    if (std::isfinite(f0)) {
        const double curvature = f0 - f_ - slope * alpha0;
        if (curvature > 0.0) {
            interpolated = std::min(-slope * alpha0 * alpha0 / (2.0 * curvature), kMaxExtrapolation * alpha0);
            if (interpolated > 0.0 && interpolated != alpha0) {
                const double fq = trial(interpolated);
                if (armijo(interpolated, fq) && fq < best_f) {
                    best_alpha = interpolated;
                    best_f = fq;
                }
            }
        }
    }

    if (best_alpha == 0.0) {
        double a = (interpolated > 0.0 && interpolated < alpha0) ? interpolated : alpha0;
        for (int s = 0; s < cfg_.max_shrinks; ++s) {
            a *= cfg_.shrink;
            const double v = trial(a);
            if (armijo(a, v)) {
                best_alpha = a;
                best_f = v;
                break;
            }
        }
    }

    if (best_alpha == 0.0) {
        // Line search failed: take a fixed tiny step if it does not increase f.
        rec.fallback = true;
        const double a = cfg_.fallback_step / std::max(1.0, dir_.norm());
        if (trial(a) <= f_) best_alpha = a;
        if (cfg_.log) *cfg_.log << "line search failed after " << cfg_.max_shrinks << " shrinks; fallback step " << best_alpha << "\n";
    }

    x += best_alpha * dir_;
    Vector grad_new;
    const double f_new = fn(x, &grad_new);
    if (!std::isfinite(f_new)) throw Error(ErrorKind::numeric, "objective became non-finite after an accepted step");

    const double beta = grad_new.dot(grad_new - grad_) / grad_.squaredNorm();
    ++since_restart_;
    if (!(beta > 0.0) || since_restart_ >= cfg_.restart_interval || rec.fallback) {
        dir_ = -grad_new;
        since_restart_ = 0;
    } else {
        dir_ = -grad_new + beta * dir_;
    }
    prev_alpha_ = best_alpha > 0.0 ? best_alpha : alpha0 * cfg_.shrink;
    prev_slope_ = slope;
    grad_ = std::move(grad_new);
    f_ = f_new;

    rec.alpha = best_alpha;
    rec.f_after = f_new;
    return rec;
}

MinimizeResult minimize(const ObjectiveFn& fn, Vector& x, const CgConfig& cfg, int max_iters, double grad_tolerance) {
    ConjugateGradient cg(cfg);
    MinimizeResult out;
    for (int it = 0; it < max_iters; ++it) {
        auto rec = cg.step(fn, x);
        if (cfg.on_step) cfg.on_step(rec);
        out.iterations = it + 1;
        if (cg.gradient().norm() <= grad_tolerance) break;
    }
    out.value = cg.value();
    out.grad_norm = cg.gradient().norm();
    return out;
}

double evaluate_validation(const EmbeddingModel& model, const ExemplarSet& references, const Matrix& val,
                           const Labels& val_labels, int k, Backend backend) {
    if (k < 1) throw Error(ErrorKind::config, "k must be >= 1");
    if (val_labels.empty()) return std::numeric_limits<double>::quiet_NaN();
    return classify_embedded(model, references, val, val_labels, k, backend).error;
}

namespace {

/// Deals class-shuffled indices round-robin so every batch mirrors the class mix.
std::vector<std::vector<std::size_t>> stratified_batches(const Labels& labels, int class_count, std::size_t batches,
                                                         std::mt19937_64& rng) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    std::vector<std::vector<std::size_t>> out(batches);
    std::size_t t = 0;
    for (auto& members : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        for (auto i : members) out[t++ % batches].push_back(i);
    }
    for (auto& b : out) std::sort(b.begin(), b.end());
    return out;
}

/// Pairwise targets need a same-class partner for every point.
std::vector<std::size_t> drop_isolated(const std::vector<std::size_t>& batch, const Labels& labels, int class_count) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(class_count), 0);
    for (auto i : batch) ++counts[static_cast<std::size_t>(labels[i])];
    std::vector<std::size_t> out;
    for (auto i : batch) {
        if (counts[static_cast<std::size_t>(labels[i])] >= 2) out.push_back(i);
    }
    return out;
}

} // namespace

TrainResult train(EmbeddingModel model, const Dataset& ds, const Split& split, ExemplarSet exemplars,
                  const TrainOptions& options, const CgConfig& cfg) {
    cfg.validate();
    if (split.train.empty()) throw Error(ErrorKind::data, "training split is empty");
    const bool exemplar_mode = options.mode == LossMode::exemplar;
    if (exemplar_mode && exemplars.size() == 0) throw Error(ErrorKind::config, "exemplar training needs exemplars");
    if (exemplar_mode && static_cast<std::size_t>(exemplars.vectors.cols()) != model.input_dim()) {
        throw Error(ErrorKind::dimension, "exemplar dimension does not match the model input");
    }
    if (!exemplar_mode) exemplars = {};
    const bool learn = exemplar_mode && options.learn_exemplars;

    const Matrix X = gather_rows(ds.features, split.train);
    const Labels y = gather_labels(ds.labels, split.train);
    const Matrix Xval = gather_rows(ds.features, split.validation);
    const Labels yval = gather_labels(ds.labels, split.validation);
    const int k = cfg.k > 0 ? cfg.k : default_k(exemplars.size());

    const auto P = static_cast<Eigen::Index>(model.param_count());
    const Eigen::Index E = learn ? exemplars.vectors.size() : 0;
    Vector theta(P + E);
    theta.head(P) = model.flatten();
    if (learn) theta.tail(E) = Eigen::Map<const Vector>(exemplars.vectors.data(), E);

    EmbeddingModel work = model;
    ExemplarSet work_ex = exemplars;
    auto unpack = [&](const Vector& t) {
        work.assign(t.head(P));
        if (learn) Eigen::Map<Vector>(work_ex.vectors.data(), E) = t.tail(E);
    };

    const std::size_t n = y.size();
    const std::size_t batches = std::max<std::size_t>(1, (n + cfg.batch_size - 1) / cfg.batch_size);
    const bool full_batch = batches == 1;

    TrainResult result{model, exemplars, {}};
    result.report.batches_per_epoch = batches;
    double best_error = kInf;
    int since_improvement = 0;

    std::mt19937_64 rng(cfg.seed);
    ConjugateGradient cg(cfg);
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        auto plan = full_batch ? std::vector<std::vector<std::size_t>>{} : stratified_batches(y, ds.class_count, batches, rng);
        if (full_batch) {
            plan.emplace_back(n);
            for (std::size_t i = 0; i < n; ++i) plan.front()[i] = i;
        }

        double loss_sum = 0.0;
        std::size_t loss_terms = 0;
        for (std::size_t b = 0; b < plan.size(); ++b) {
            auto rows = exemplar_mode ? plan[b] : drop_isolated(plan[b], y, ds.class_count);
            if (rows.size() < (exemplar_mode ? 1u : 2u)) continue;
            const Matrix Xb = full_batch ? X : gather_rows(X, rows);
            const Labels yb = full_batch ? y : gather_labels(y, rows);

            ObjectiveFn fn = [&](const Vector& t, Vector* grad) {
                unpack(t);
                LossValue value;
                if (exemplar_mode) {
                    ExemplarLossConfig lc{options.normalization, grad != nullptr};
                    value = exemplar_loss(work, Xb, yb, work_ex.as_loss_state(learn), lc, cfg.backend);
                } else {
                    PairwiseLossConfig lc{options.kernel, grad != nullptr};
                    value = pairwise_loss(work, Xb, yb, lc, cfg.backend);
                }
                if (grad) {
                    grad->resize(P + E);
                    grad->head(P) = value.grad_params;
                    if (learn) grad->tail(E) = Eigen::Map<const Vector>(value.grad_exemplars.data(), E);
                }
                return value.loss;
            };

            if (!full_batch) cg.reset();
            for (int s = 0; s < cfg.cg_steps_per_batch; ++s) {
                StepRecord rec;
                try {
                    rec = cg.step(fn, theta);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::numeric) throw;
                    throw Error(ErrorKind::numeric, "epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                                                        " (" + std::to_string(rows.size()) + " points): " + e.what());
                }
                ++result.report.steps;
                result.report.fallback_steps += rec.fallback;
                if (cfg.on_step) cfg.on_step(rec);
            }
            loss_sum += cg.value();
            ++loss_terms;
        }
        unpack(theta);

        EpochRecord record;
        record.epoch = epoch;
        record.loss = loss_terms ? loss_sum / static_cast<double>(loss_terms) : 0.0;
        const ExemplarSet references = exemplar_mode ? work_ex : ExemplarSet{X, y};
        record.val_error = evaluate_validation(work, references, Xval, yval, k, cfg.backend);
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.report.epochs.push_back(record);
        if (cfg.log) {
            *cfg.log << "epoch=" << epoch << " loss=" << record.loss << " val_err=" << record.val_error
                     << " secs=" << record.seconds << std::endl;
        }

        const bool scored = std::isfinite(record.val_error);
        if (!scored || record.val_error < best_error) {
            if (scored) best_error = record.val_error;
            result.model = work;
            result.exemplars = work_ex;
            result.report.selected_epoch = epoch;
            since_improvement = 0;
        } else if (cfg.patience > 0 && ++since_improvement >= cfg.patience) {
            break;
        }
    }
    return result;
}

} // namespace enhope
