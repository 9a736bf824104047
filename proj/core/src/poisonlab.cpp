#include "poisonmark/poisonlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "poisonmark/detect.hpp"
#include "poisonmark/embed.hpp"
#include "poisonmark/error.hpp"
#include "poisonmark/parallel.hpp"
#include "poisonmark/partition.hpp"

namespace poisonmark {

namespace {

Seed128 sub_seed(Seed128 parent, std::uint64_t tag) {
    return Rng(parent).derive(tag);
}

double logistic_loss(double f, double y) {
    // log(1 + exp(-y f)), stable for large |f|.
    const double m = -y * f;
    return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

}  // namespace

ToyTask gen_toy_task(const ToyTaskParams& params) {
    if (params.d == 0 || params.n_train == 0 || params.n_test == 0) {
        throw ArgumentError("toy task needs d, n_train, n_test >= 1");
    }
    ToyTask task;
    task.d = params.d;
    task.noise_scale = params.noise_scale;
    task.seed = params.seed;
    task.degenerate_means = params.class_sep == 0.0;

    task.class_means.resize(2 * params.d);
    Rng mean_rng(sub_seed(params.seed, 0));
    for (std::size_t j = 0; j < params.d; ++j) {
        const double shift = 0.5 * params.class_sep * mean_rng.sign();
        task.class_means[j] = 0.5 - shift;             // label -1
        task.class_means[params.d + j] = 0.5 + shift;  // label +1
    }

    auto fill_split = [&](std::size_t n, Seed128 seed) {
        std::vector<double> values(n * params.d);
        std::vector<std::int64_t> labels(n);
        Rng rng(seed);
        for (std::size_t i = 0; i < n; ++i) {
            const std::int64_t y = (i % 2 == 0) ? 1 : -1;
            labels[i] = y;
            const double* mean =
                task.class_means.data() + (y > 0 ? params.d : 0);
            for (std::size_t j = 0; j < params.d; ++j) {
                const double v = mean[j] + params.noise_scale * rng.normal();
                values[i * params.d + j] = std::clamp(v, 0.0, 1.0);
            }
        }
        return DataMatrix::unchecked(n, params.d, std::move(values),
                                     std::move(labels));
    };
    task.train = fill_split(params.n_train, sub_seed(params.seed, 1));
    task.test = fill_split(params.n_test, sub_seed(params.seed, 2));
    return task;
}

namespace {

// delta[i] = y_i * eps_p * r with r pointing against the class-mean gap, so
// the poisoned train set is perfectly separable by the pattern while the
// true features are counteracted. Degenerate (equal-mean) dimensions fall
// back to seeded random signs.
std::vector<double> class_pattern_poison(const DataMatrix& train,
                                         std::span<const double> mean_gap,
                                         double eps_p,
                                         std::span<const std::size_t> dims,
                                         Seed128 seed) {
    if (dims.empty()) throw ArgumentError("availability poison needs dims");
    if (eps_p < 0.0) throw ArgumentError("eps_p must be >= 0");
    if (!train.has_labels()) {
        throw ArgumentError("availability poison needs labeled data");
    }
    const std::size_t n = train.n_samples();
    const std::size_t d = train.dim();
    std::vector<double> pattern(d, 0.0);
    Rng rng(seed);
    for (const std::size_t j : dims) {
        if (j >= d) throw ArgumentError("poison dim index out of range");
        const double gap = mean_gap[j];
        const double sign_j =
            gap > 0.0 ? -1.0 : (gap < 0.0 ? 1.0 : static_cast<double>(rng.sign()));
        pattern[j] = eps_p * sign_j;
    }
    std::vector<double> delta(n * d, 0.0);
    const auto& labels = train.labels();
    for (std::size_t i = 0; i < n; ++i) {
        const double y = labels[i] > 0 ? 1.0 : -1.0;
        for (const std::size_t j : dims) {
            delta[i * d + j] = y * pattern[j];
        }
    }
    return delta;
}

}  // namespace

std::vector<double> toy_availability_poison(const ToyTask& task, double eps_p,
                                            std::span<const std::size_t> dims,
                                            Seed128 seed) {
    std::vector<double> gap(task.d);
    for (std::size_t j = 0; j < task.d; ++j) {
        gap[j] = task.class_means[task.d + j] - task.class_means[j];
    }
    return class_pattern_poison(task.train, gap, eps_p, dims, seed);
}

std::vector<double> availability_poison_rows(const DataMatrix& train,
                                             double eps_p,
                                             std::span<const std::size_t> dims,
                                             Seed128 seed) {
    if (!train.has_labels()) {
        throw ArgumentError("availability poison needs labeled data");
    }
    const std::size_t d = train.dim();
    std::vector<double> sum_pos(d, 0.0), sum_neg(d, 0.0);
    std::size_t n_pos = 0, n_neg = 0;
    const auto& labels = train.labels();
    for (std::size_t i = 0; i < train.n_samples(); ++i) {
        const auto row = train.row(i);
        if (labels[i] > 0) {
            ++n_pos;
            for (std::size_t j = 0; j < d; ++j) sum_pos[j] += row[j];
        } else {
            ++n_neg;
            for (std::size_t j = 0; j < d; ++j) sum_neg[j] += row[j];
        }
    }
    if (n_pos == 0 || n_neg == 0) {
        throw ArgumentError("availability poison needs both classes present");
    }
    std::vector<double> gap(d);
    for (std::size_t j = 0; j < d; ++j) {
        gap[j] = sum_pos[j] / static_cast<double>(n_pos) -
                 sum_neg[j] / static_cast<double>(n_neg);
    }
    return class_pattern_poison(train, gap, eps_p, dims, seed);
}

BackdoorDelta backdoor_poison_rows(const DataMatrix& train, double eps_p,
                                   std::span<const std::size_t> trigger_dims,
                                   std::int64_t target_label, double poison_rate,
                                   Seed128 seed) {
    if (trigger_dims.empty()) throw ArgumentError("backdoor needs trigger dims");
    if (!(poison_rate >= 0.0 && poison_rate <= 1.0)) {
        throw ArgumentError("poison_rate must be in [0, 1]");
    }
    if (!train.has_labels()) {
        throw ArgumentError("backdoor poison needs labeled data");
    }
    const std::size_t n = train.n_samples();
    const std::size_t d = train.dim();

    BackdoorDelta out;
    out.trigger.assign(d, 0.0);
    Rng rng(sub_seed(seed, 0));
    for (const std::size_t j : trigger_dims) {
        if (j >= d) throw ArgumentError("trigger dim index out of range");
        out.trigger[j] = eps_p * rng.sign();
    }
    out.train_delta.assign(n * d, 0.0);

    // Clean-label: only target-class rows receive the trigger in training.
    std::vector<std::size_t> target_rows;
    const auto& labels = train.labels();
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == target_label) target_rows.push_back(i);
    }
    const std::size_t count = static_cast<std::size_t>(
        std::floor(poison_rate * static_cast<double>(target_rows.size())));
    Rng pick_rng(sub_seed(seed, 1));
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(pick_rng.below(target_rows.size() - i));
        std::swap(target_rows[i], target_rows[j]);
    }
    out.poisoned_rows.assign(target_rows.begin(), target_rows.begin() + count);
    std::sort(out.poisoned_rows.begin(), out.poisoned_rows.end());
    for (const std::size_t i : out.poisoned_rows) {
        const auto row = train.row(i);
        for (const std::size_t j : trigger_dims) {
            // Stored post-clamp so downstream application stays in range.
            out.train_delta[i * d + j] =
                std::clamp(row[j] + out.trigger[j], 0.0, 1.0) - row[j];
        }
    }
    return out;
}

BackdoorPoison toy_backdoor_poison(const ToyTask& task, double eps_p,
                                   std::span<const std::size_t> trigger_dims,
                                   std::int64_t target_label, double poison_rate,
                                   Seed128 seed) {
    auto delta = backdoor_poison_rows(task.train, eps_p, trigger_dims,
                                      target_label, poison_rate, seed);

    BackdoorPoison out;
    out.trigger_dims.assign(trigger_dims.begin(), trigger_dims.end());
    out.train_delta = std::move(delta.train_delta);
    out.poisoned_rows = std::move(delta.poisoned_rows);

    const std::size_t n_test = task.test.n_samples();
    const std::size_t d = task.d;
    std::vector<double> test_values(task.test.values());
    for (std::size_t i = 0; i < n_test; ++i) {
        for (const std::size_t j : trigger_dims) {
            test_values[i * d + j] =
                std::clamp(test_values[i * d + j] + delta.trigger[j], 0.0, 1.0);
        }
    }
    std::optional<std::vector<std::int64_t>> test_labels;
    if (task.test.has_labels()) test_labels = task.test.labels();
    out.triggered_test = DataMatrix::unchecked(n_test, d, std::move(test_values),
                                               std::move(test_labels));
    return out;
}

double ToyModel::forward(std::span<const double> x) const {
    if (x.size() != widths.front()) {
        throw ShapeError("input length does not match model");
    }
    std::vector<double> buf(x.begin(), x.end());
    std::vector<double> next;
    const std::size_t layers = weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = widths[l];
        const std::size_t out_dim = widths[l + 1];
        next.assign(out_dim, 0.0);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* w = weights[l].data() + o * in;
            double z = biases[l][o];
            for (std::size_t j = 0; j < in; ++j) z += w[j] * buf[j];
            next[o] = z;
        }
        if (l + 1 < layers) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(out_dim));
            for (double& v : next) v = v > 0.0 ? v * scale : 0.0;
        }
        buf.swap(next);
    }
    return buf[0];
}

ToyModel init_toy_model(std::span<const std::size_t> widths, Seed128 seed) {
    if (widths.size() < 2) throw ArgumentError("model needs at least 2 layers");
    if (widths.back() != 1) throw ArgumentError("output width must be 1");
    ToyModel m;
    m.widths.assign(widths.begin(), widths.end());
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::vector<double> w(in * out);
        for (double& v : w) v = rng.uniform(-limit, limit);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(out, 0.0);
    }
    return m;
}

namespace {

// Per-sample forward keeping activations, then backprop into grads.
// Layout mirrors ToyModel: grads[l] has the shape of weights[l] / biases[l].
struct TrainWorkspace {
    std::vector<std::vector<double>> pre;      // z per layer
    std::vector<std::vector<double>> post;     // scaled ReLU output per layer
    std::vector<std::vector<double>> grad_in;  // gradient wrt layer input

    explicit TrainWorkspace(const ToyModel& m) {
        const std::size_t layers = m.layer_count();
        pre.resize(layers);
        post.resize(layers);
        grad_in.resize(layers);
        for (std::size_t l = 0; l < layers; ++l) {
            pre[l].resize(m.widths[l + 1]);
            post[l].resize(m.widths[l + 1]);
            grad_in[l].resize(m.widths[l]);
        }
    }
};

double forward_backward(const ToyModel& model, std::span<const double> x,
                        double y, TrainWorkspace& ws,
                        std::vector<std::vector<double>>& grad_w,
                        std::vector<std::vector<double>>& grad_b) {
    const std::size_t layers = model.layer_count();
    const double* input = x.data();
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = model.widths[l];
        const std::size_t out = model.widths[l + 1];
        for (std::size_t o = 0; o < out; ++o) {
            const double* w = model.weights[l].data() + o * in;
            double z = model.biases[l][o];
            for (std::size_t j = 0; j < in; ++j) z += w[j] * input[j];
            ws.pre[l][o] = z;
        }
        if (l + 1 < layers) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(out));
            for (std::size_t o = 0; o < out; ++o) {
                const double z = ws.pre[l][o];
                ws.post[l][o] = z > 0.0 ? z * scale : 0.0;
            }
            input = ws.post[l].data();
        }
    }
    const double f = ws.pre[layers - 1][0];
    const double loss = logistic_loss(f, y);
    // dL/dF = -y * sigmoid(-y F)
    double g = -y / (1.0 + std::exp(y * f));

    std::vector<double> grad_out(1, g);
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = model.widths[l];
        const std::size_t out = model.widths[l + 1];
        const double* layer_input =
            l == 0 ? x.data() : ws.post[l - 1].data();
        auto& gin = ws.grad_in[l];
        std::fill(gin.begin(), gin.end(), 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            const double go = grad_out[o];
            if (go == 0.0) continue;
            double* gw = grad_w[l].data() + o * in;
            const double* w = model.weights[l].data() + o * in;
            for (std::size_t j = 0; j < in; ++j) {
                gw[j] += go * layer_input[j];
                gin[j] += go * w[j];
            }
            grad_b[l][o] += go;
        }
        if (l > 0) {
            // Through the scaled ReLU of layer l-1.
            const std::size_t width = model.widths[l];
            const double scale = 1.0 / std::sqrt(static_cast<double>(width));
            grad_out.assign(width, 0.0);
            for (std::size_t o = 0; o < width; ++o) {
                grad_out[o] = ws.pre[l - 1][o] > 0.0 ? gin[o] * scale : 0.0;
            }
        }
    }
    return loss;
}

}  // namespace

TrainResult train(const DataMatrix& train_data, const TrainConfig& config) {
    if (!train_data.has_labels()) {
        throw ArgumentError("training needs labeled data");
    }
    std::vector<std::size_t> widths;
    widths.push_back(train_data.dim());
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(1);

    TrainResult result;
    result.model = init_toy_model(widths, sub_seed(config.seed, 0));
    ToyModel& model = result.model;
    result.initial_train_loss = mean_loss(model, train_data);
    result.final_train_loss = result.initial_train_loss;
    if (config.epochs == 0) return result;

    const std::size_t n = train_data.n_samples();
    const std::size_t batch =
        std::max<std::size_t>(1, std::min(config.batch_size, n));
    const auto& labels = train_data.labels();

    std::vector<std::vector<double>> grad_w, grad_b, vel_w, vel_b;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        grad_w.emplace_back(model.weights[l].size(), 0.0);
        grad_b.emplace_back(model.biases[l].size(), 0.0);
        vel_w.emplace_back(model.weights[l].size(), 0.0);
        vel_b.emplace_back(model.biases[l].size(), 0.0);
    }
    TrainWorkspace ws(model);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr =
            config.cosine_decay
                ? config.learning_rate * 0.5 *
                      (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                      static_cast<double>(config.epochs)))
                : config.learning_rate;
        Rng shuffle_rng(sub_seed(config.seed, 1 + epoch));
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(shuffle_rng.below(n - i));
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(start + batch, n);
            const double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t l = 0; l < model.layer_count(); ++l) {
                std::fill(grad_w[l].begin(), grad_w[l].end(), 0.0);
                std::fill(grad_b[l].begin(), grad_b[l].end(), 0.0);
            }
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                epoch_loss +=
                    forward_backward(model, train_data.row(i),
                                     labels[i] > 0 ? 1.0 : -1.0, ws, grad_w,
                                     grad_b);
            }
            for (std::size_t l = 0; l < model.layer_count(); ++l) {
                auto& w = model.weights[l];
                auto& gw = grad_w[l];
                auto& vw = vel_w[l];
                for (std::size_t p = 0; p < w.size(); ++p) {
                    vw[p] = config.momentum * vw[p] - lr * gw[p] * inv;
                    w[p] += vw[p];
                }
                auto& b = model.biases[l];
                auto& gb = grad_b[l];
                auto& vb = vel_b[l];
                for (std::size_t p = 0; p < b.size(); ++p) {
                    vb[p] = config.momentum * vb[p] - lr * gb[p] * inv;
                    b[p] += vb[p];
                }
            }
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            throw NumericError("training diverged at epoch " +
                               std::to_string(epoch));
        }
        result.final_train_loss = epoch_loss;
    }
    return result;
}

double mean_loss(const ToyModel& model, const DataMatrix& data) {
    if (!data.has_labels()) throw ArgumentError("mean_loss needs labels");
    const auto& labels = data.labels();
    double total = 0.0;
    for (std::size_t i = 0; i < data.n_samples(); ++i) {
        total += logistic_loss(model.forward(data.row(i)),
                               labels[i] > 0 ? 1.0 : -1.0);
    }
    return total / static_cast<double>(data.n_samples());
}

EvalResult evaluate(const ToyModel& model, const DataMatrix& test,
                    const DataMatrix* triggered, std::int64_t target_label) {
    if (!test.has_labels()) throw ArgumentError("evaluate needs labels");
    if (test.dim() != model.widths.front()) {
        throw ShapeError("test dimension does not match model");
    }
    EvalResult out;
    const auto& labels = test.labels();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.n_samples(); ++i) {
        const std::int64_t pred = model.forward(test.row(i)) > 0.0 ? 1 : -1;
        correct += pred == labels[i];
    }
    out.accuracy = static_cast<double>(correct) /
                   static_cast<double>(test.n_samples());
    if (triggered != nullptr) {
        if (triggered->dim() != model.widths.front()) {
            throw ShapeError("triggered dimension does not match model");
        }
        std::size_t hits = 0;
        for (std::size_t i = 0; i < triggered->n_samples(); ++i) {
            const std::int64_t pred =
                model.forward(triggered->row(i)) > 0.0 ? 1 : -1;
            hits += pred == target_label;
        }
        out.attack_success_rate = static_cast<double>(hits) /
                                  static_cast<double>(triggered->n_samples());
    }
    return out;
}

double gradient_check(const DataMatrix& data, const TrainConfig& config,
                      std::size_t probes, Seed128 seed) {
    if (!data.has_labels()) throw ArgumentError("gradient check needs labels");
    std::vector<std::size_t> widths;
    widths.push_back(data.dim());
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(1);
    ToyModel model = init_toy_model(widths, sub_seed(config.seed, 0));

    // Analytic batch-mean gradient.
    std::vector<std::vector<double>> grad_w, grad_b;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        grad_w.emplace_back(model.weights[l].size(), 0.0);
        grad_b.emplace_back(model.biases[l].size(), 0.0);
    }
    TrainWorkspace ws(model);
    const auto& labels = data.labels();
    const double inv = 1.0 / static_cast<double>(data.n_samples());
    for (std::size_t i = 0; i < data.n_samples(); ++i) {
        forward_backward(model, data.row(i), labels[i] > 0 ? 1.0 : -1.0, ws,
                         grad_w, grad_b);
    }

    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t p = 0; p < probes; ++p) {
        const std::size_t layer =
            static_cast<std::size_t>(rng.below(model.layer_count()));
        const bool is_bias = rng.below(8) == 0;
        auto& params = is_bias ? model.biases[layer] : model.weights[layer];
        const auto& grads = is_bias ? grad_b[layer] : grad_w[layer];
        const std::size_t idx =
            static_cast<std::size_t>(rng.below(params.size()));
        const double analytic = grads[idx] * inv;

        const double theta = params[idx];
        const double h = 1e-6 * std::max(1.0, std::abs(theta));
        params[idx] = theta + h;
        const double up = mean_loss(model, data);
        params[idx] = theta - h;
        const double down = mean_loss(model, data);
        params[idx] = theta;
        const double fd = (up - down) / (2.0 * h);
        const double rel = std::abs(analytic - fd) /
                           std::max({std::abs(analytic), std::abs(fd), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

std::string attack_name(AttackKind a) {
    return a == AttackKind::availability ? "availability" : "backdoor";
}

AttackKind attack_from_name(const std::string& name) {
    if (name == "availability") return AttackKind::availability;
    if (name == "backdoor") return AttackKind::backdoor;
    throw ArgumentError("unknown attack '" + name + "'");
}

namespace {

// clamp(base + delta) materialized with labels, plus the clamped fraction.
std::pair<DataMatrix, double> apply_delta_clipped(const DataMatrix& base,
                                                  std::span<const double> delta) {
    const std::size_t n = base.n_samples();
    const std::size_t d = base.dim();
    std::vector<double> values(n * d);
    const auto& bv = base.values();
    std::size_t clipped = 0;
    for (std::size_t i = 0; i < n * d; ++i) {
        const double v = bv[i] + delta[i];
        const double c = std::clamp(v, 0.0, 1.0);
        clipped += c != v;
        values[i] = c;
    }
    std::optional<std::vector<std::int64_t>> labels;
    if (base.has_labels()) labels = base.labels();
    return {DataMatrix::unchecked(n, d, std::move(values), std::move(labels)),
            static_cast<double>(clipped) / static_cast<double>(n * d)};
}

std::vector<std::size_t> all_dims(std::size_t d) {
    std::vector<std::size_t> out(d);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
}

std::vector<std::size_t> pick_dims(std::span<const std::size_t> allowed,
                                   std::size_t count, Seed128 seed) {
    if (count >= allowed.size()) {
        return {allowed.begin(), allowed.end()};
    }
    std::vector<std::size_t> pool(allowed.begin(), allowed.end());
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
}

SweepCell run_cell(const SweepConfig& config, std::size_t q, Seed128 seed) {
    SweepCell cell;
    cell.q = q;
    cell.seed = seed;

    ToyTaskParams task_params = config.task;
    task_params.seed = sub_seed(seed, 0);
    const ToyTask task = gen_toy_task(task_params);
    const std::size_t d = task.d;
    const bool concurrent = scheme_is_concurrent(config.scheme);
    const bool sample_wise = scheme_is_sample_wise(config.scheme);

    DimensionPartition partition;
    if (q > 0) {
        partition = make_partition(d, q, sub_seed(sub_seed(seed, 1), q),
                                   concurrent ? PartitionMode::concurrent
                                              : PartitionMode::post);
    }
    const std::vector<std::size_t> poison_support =
        (q > 0 && concurrent) ? partition.poison_dims : all_dims(d);

    const Seed128 poison_seed = sub_seed(sub_seed(seed, 3), q);
    std::vector<double> poison_delta;
    DataMatrix triggered_test;
    if (config.attack == AttackKind::availability) {
        poison_delta = toy_availability_poison(task, config.eps_p,
                                               poison_support, poison_seed);
    } else {
        const auto trigger_dims =
            pick_dims(poison_support, config.trigger_dim_count,
                      sub_seed(poison_seed, 7));
        auto backdoor = toy_backdoor_poison(task, config.eps_p, trigger_dims,
                                            config.target_label,
                                            config.poison_rate, poison_seed);
        poison_delta = std::move(backdoor.train_delta);
        triggered_test = std::move(backdoor.triggered_test);
    }

    std::vector<std::string> ids;
    if (sample_wise) {
        ids.reserve(task.train.n_samples());
        for (std::size_t i = 0; i < task.train.n_samples(); ++i) {
            ids.push_back("row-" + std::to_string(i));
        }
    }

    DataMatrix final_train;
    std::optional<Key> key;
    std::optional<Seed128> master_seed;
    if (q == 0) {
        auto [poisoned, frac] = apply_delta_clipped(task.train, poison_delta);
        final_train = std::move(poisoned);
        cell.clipped_fraction = frac;
    } else {
        WatermarkPlan plan;
        plan.scheme = config.scheme;
        plan.budget = BudgetConfig{config.eps_w, config.eps_p, 0.05};
        plan.partition = partition;
        const Seed128 key_seed = sub_seed(sub_seed(seed, 2), q);
        if (sample_wise) {
            master_seed = key_seed;
            plan.key_source = KeyStream{key_seed};
        } else {
            key = concurrent ? sample_concurrent_key(partition, key_seed)
                             : sample_identical_key(d, key_seed);
            plan.key_source = *key;
        }
        if (concurrent) {
            const auto pm = embed_poisoning_concurrent(
                task.train, poison_delta, plan, ClipMode::clip, ids);
            final_train = pm.materialize();
            cell.clipped_fraction = pm.clipped_fraction();
        } else {
            auto [poisoned, poison_frac] =
                apply_delta_clipped(task.train, poison_delta);
            const auto pm =
                embed_post_poisoning(poisoned, plan, ClipMode::clip, ids);
            final_train = pm.materialize();
            cell.clipped_fraction = poison_frac + pm.clipped_fraction();
        }
    }

    TrainConfig train_config = config.train;
    train_config.seed = sub_seed(sub_seed(seed, 4), q);
    const TrainResult trained = train(final_train, train_config);
    cell.train_loss = trained.final_train_loss;

    cell.clean_accuracy = evaluate(trained.model, task.test).accuracy;
    if (config.attack == AttackKind::backdoor) {
        cell.attack_success_rate =
            *evaluate(trained.model, task.test, &triggered_test,
                      config.target_label)
                 .attack_success_rate;
        cell.has_asr = true;
    }

    if (q > 0) {
        const std::size_t n = task.train.n_samples();
        std::vector<double> pos(n), neg(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Key row_key =
                sample_wise
                    ? sample_wise_key_stream(partition,
                                             concurrent ? KeyMode::concurrent
                                                        : KeyMode::identical,
                                             *master_seed, ids[i])
                    : *key;
            pos[i] = score(row_key, final_train.row(i));
            neg[i] = score(row_key, task.train.row(i));
        }
        cell.auroc = auroc(pos, neg);
        cell.has_auroc = true;
    }
    return cell;
}

}  // namespace

TrendReport q_sweep(const SweepConfig& config, std::size_t threads) {
    if (config.q_values.empty()) throw ArgumentError("q_sweep needs q values");
    if (config.seeds.empty()) throw ArgumentError("q_sweep needs seeds");
    for (const std::size_t q : config.q_values) {
        if (q > config.task.d) {
            throw ArgumentError("invalid watermark length q = " +
                                std::to_string(q) + " exceeds d = " +
                                std::to_string(config.task.d));
        }
    }
    TrendReport report;
    report.scheme = config.scheme;
    report.attack = config.attack;
    report.q_values = config.q_values;
    report.seeds_used = config.seeds.size();
    report.cells.resize(config.q_values.size() * config.seeds.size());

    parallel_for(report.cells.size(), threads,
                 [&](std::size_t begin, std::size_t end) {
                     for (std::size_t idx = begin; idx < end; ++idx) {
                         const std::size_t qi = idx / config.seeds.size();
                         const std::size_t si = idx % config.seeds.size();
                         report.cells[idx] = run_cell(
                             config, config.q_values[qi], config.seeds[si]);
                     }
                 });

    const std::size_t ns = config.seeds.size();
    for (std::size_t qi = 0; qi < config.q_values.size(); ++qi) {
        double auroc_sum = 0.0, acc_sum = 0.0, asr_sum = 0.0;
        std::size_t auroc_count = 0;
        for (std::size_t si = 0; si < ns; ++si) {
            const auto& cell = report.cells[qi * ns + si];
            acc_sum += cell.clean_accuracy;
            if (cell.has_auroc) {
                auroc_sum += cell.auroc;
                ++auroc_count;
            }
            if (cell.has_asr) asr_sum += cell.attack_success_rate;
        }
        report.clean_acc_per_q.push_back(acc_sum / static_cast<double>(ns));
        report.auroc_per_q.push_back(
            auroc_count > 0 ? auroc_sum / static_cast<double>(auroc_count)
                            : std::numeric_limits<double>::quiet_NaN());
        report.asr_per_q.push_back(
            config.attack == AttackKind::backdoor
                ? asr_sum / static_cast<double>(ns)
                : std::numeric_limits<double>::quiet_NaN());
    }
    return report;
}

std::string TrendReport::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "scheme,attack,q,seed,auroc,clean_accuracy,asr,train_loss,"
          "clipped_fraction\n";
    for (const auto& cell : cells) {
        os << scheme_name(scheme) << "," << attack_name(attack) << "," << cell.q
           << "," << cell.seed.to_hex() << ",";
        if (cell.has_auroc) os << cell.auroc;
        os << "," << cell.clean_accuracy << ",";
        if (cell.has_asr) os << cell.attack_success_rate;
        os << "," << cell.train_loss << "," << cell.clipped_fraction << "\n";
    }
    return os.str();
}

std::string TrendReport::to_json() const {
    nlohmann::json j;
    j["scheme"] = scheme_name(scheme);
    j["attack"] = attack_name(attack);
    j["q_values"] = q_values;
    j["seeds_used"] = seeds_used;
    auto optional_list = [](const std::vector<double>& v) {
        nlohmann::json arr = nlohmann::json::array();
        for (const double x : v) {
            if (std::isnan(x)) {
                arr.push_back(nullptr);
            } else {
                arr.push_back(x);
            }
        }
        return arr;
    };
    j["auroc_per_q"] = optional_list(auroc_per_q);
    j["clean_acc_per_q"] = optional_list(clean_acc_per_q);
    j["asr_per_q"] = optional_list(asr_per_q);
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& cell : cells) {
        nlohmann::json c{{"q", cell.q},
                         {"seed", cell.seed.to_hex()},
                         {"clean_accuracy", cell.clean_accuracy},
                         {"train_loss", cell.train_loss},
                         {"clipped_fraction", cell.clipped_fraction}};
        if (cell.has_auroc) c["auroc"] = cell.auroc;
        if (cell.has_asr) c["asr"] = cell.attack_success_rate;
        cells_json.push_back(std::move(c));
    }
    j["cells"] = std::move(cells_json);
    return j.dump(2) + "\n";
}

namespace {

std::vector<double> midranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && v[order[j]] == v[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = midrank;
        i = j;
    }
    return ranks;
}

}  // namespace

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ArgumentError("spearman_rho needs two equal lists of length >= 2");
    }
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx == 0.0 || vy == 0.0) {
        throw ArgumentError("spearman_rho undefined for constant ranks");
    }
    return cov / std::sqrt(vx * vy);
}

}  // namespace poisonmark
