#include "poisonmark/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "poisonmark/error.hpp"

namespace poisonmark {

namespace {

void check_eps_w(double eps_w) {
    if (!(eps_w > 0.0)) {
        throw ArgumentError("eps_w must be > 0, got " + std::to_string(eps_w));
    }
}

void check_omega(double omega) {
    if (!(omega > 0.0 && omega < 1.0)) {
        throw ArgumentError("omega must be in (0, 1), got " +
                            std::to_string(omega));
    }
}

void check_positive(std::int64_t v, const char* name) {
    if (v < 1) {
        throw ArgumentError(std::string(name) + " must be >= 1, got " +
                            std::to_string(v));
    }
}

// Smallest integer strictly greater than `bound`, never below 1.
std::int64_t strictly_above(double bound) {
    if (!std::isfinite(bound)) throw NumericError("non-finite bound value");
    const std::int64_t q = static_cast<std::int64_t>(std::floor(bound)) + 1;
    return std::max<std::int64_t>(q, 1);
}

}  // namespace

std::int64_t q_min_sample_post(std::int64_t d, double eps_w, double omega) {
    check_positive(d, "d");
    check_eps_w(eps_w);
    check_omega(omega);
    const double bound =
        std::sqrt(2.0 * static_cast<double>(d) * std::log(1.0 / omega)) / eps_w;
    return strictly_above(bound);
}

std::int64_t q_min_sample_concurrent(double eps_w, double omega) {
    check_eps_w(eps_w);
    check_omega(omega);
    const double bound = 2.0 / (eps_w * eps_w) * std::log(1.0 / omega);
    return strictly_above(bound);
}

std::int64_t q_min_universal_post_all(std::int64_t d, std::int64_t n,
                                      double eps_w, double eps_p, double omega) {
    check_positive(d, "d");
    check_positive(n, "N");
    check_eps_w(eps_w);
    check_omega(omega);
    if (eps_p < 0.0) throw ArgumentError("eps_p must be >= 0");
    const double bound =
        (2.0 + eps_p) / eps_w *
        std::sqrt(0.5 * static_cast<double>(d) *
                  std::log(2.0 * static_cast<double>(n) / omega));
    return strictly_above(bound);
}

std::int64_t q_min_universal_post_most(std::int64_t d, double eps_w,
                                       double omega) {
    check_positive(d, "d");
    check_eps_w(eps_w);
    check_omega(omega);
    const double bound =
        2.0 / eps_w *
        std::sqrt(2.0 * static_cast<double>(d) * std::log(1.0 / omega));
    return strictly_above(bound);
}

std::int64_t q_min_universal_concurrent_all(std::int64_t n, double eps_w,
                                            double omega) {
    check_positive(n, "N");
    check_eps_w(eps_w);
    check_omega(omega);
    const double bound =
        4.0 / (eps_w * eps_w) * std::log(static_cast<double>(n) / omega);
    return strictly_above(bound);
}

std::int64_t q_min_universal_concurrent_most(double eps_w, double omega) {
    check_eps_w(eps_w);
    check_omega(omega);
    const double bound = 4.5 / (eps_w * eps_w) * std::log(1.0 / omega);
    return strictly_above(bound);
}

namespace {

FailProb fail_prob_from_inner(double n, double inner, double omega, double factor) {
    if (inner >= omega) {
        return FailProb{1.0, true};
    }
    const double gap = omega - inner;
    const double mass = factor * std::exp(-n * gap * gap / (omega + inner));
    return FailProb{std::clamp(mass, 0.0, 1.0), false};
}

}  // namespace

FailProb fail_prob_post_most(std::int64_t n, std::int64_t d, std::int64_t q,
                             double eps_w, double omega) {
    check_positive(n, "N");
    check_positive(d, "d");
    check_positive(q, "q");
    check_eps_w(eps_w);
    check_omega(omega);
    const double qe = static_cast<double>(q) * eps_w;
    const double inner = std::exp(-qe * qe / (8.0 * static_cast<double>(d)));
    return fail_prob_from_inner(static_cast<double>(n), inner, omega, 2.0);
}

FailProb fail_prob_concurrent_most(std::int64_t n, std::int64_t q, double eps_w,
                                   double omega) {
    check_positive(n, "N");
    check_positive(q, "q");
    check_eps_w(eps_w);
    check_omega(omega);
    const double inner =
        std::exp(-2.0 * static_cast<double>(q) * eps_w * eps_w / 9.0);
    return fail_prob_from_inner(static_cast<double>(n), inner, omega, 1.0);
}

double generalization_radical(std::int64_t d, std::int64_t n, double mu) {
    check_positive(d, "d");
    check_positive(n, "N");
    if (!(mu > 0.0 && mu < 1.0)) {
        throw ArgumentError("mu must be in (0, 1)");
    }
    const double dn = static_cast<double>(d) / static_cast<double>(n);
    const double term =
        dn * (std::log(2.0 / dn) + 1.0) -
        std::log(mu / 4.0) / static_cast<double>(n);
    return 2.0 * std::sqrt(term);
}

std::int64_t generalization_sample_floor(std::int64_t d, double mu,
                                         double slack) {
    check_positive(d, "d");
    if (!(slack > 0.0)) {
        throw ArgumentError("slack must be > 0, got " + std::to_string(slack));
    }
    if (generalization_radical(d, d, mu) < slack) return d;  // N >= d floor
    // The radical is monotone decreasing for N >= d; exponential search
    // then bisect the first N below slack.
    std::int64_t lo = d, hi = d;
    do {
        lo = hi;
        if (hi > std::numeric_limits<std::int64_t>::max() / 2) {
            throw ArgumentError("slack unreachable within integer range");
        }
        hi *= 2;
    } while (generalization_radical(d, hi, mu) >= slack);
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (generalization_radical(d, mid, mu) < slack) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

PoisonUtilityCeiling poison_utility_ceiling_note(std::int64_t d, double eps_p) {
    check_positive(d, "d");
    if (eps_p < 0.0) throw ArgumentError("eps_p must be >= 0");
    PoisonUtilityCeiling out;
    out.note =
        "asymptotic ceiling scale sqrt(d)/eps_p for poisoning utility under "
        "concurrent watermarking; hidden constant unknown, not a certified "
        "cutoff";
    if (eps_p == 0.0) {
        out.infinite = true;
        out.scale = std::numeric_limits<double>::infinity();
        return out;
    }
    out.scale = std::sqrt(static_cast<double>(d)) / eps_p;
    return out;
}

bool sample_ordering_precondition(std::int64_t d, double eps_w, double omega) {
    check_positive(d, "d");
    check_eps_w(eps_w);
    check_omega(omega);
    return eps_w >=
           2.0 * std::sqrt(std::log(1.0 / omega) / (2.0 * static_cast<double>(d)));
}

BoundReport evaluate_bounds(std::int64_t d, std::int64_t n, double eps_w,
                            double eps_p, double omega, std::int64_t q) {
    BoundReport r;
    r.d = d;
    r.n = n;
    r.eps_w = eps_w;
    r.eps_p = eps_p;
    r.omega = omega;
    r.q_min_sample_post = q_min_sample_post(d, eps_w, omega);
    r.q_min_sample_concurrent = q_min_sample_concurrent(eps_w, omega);
    r.q_min_universal_post_all =
        q_min_universal_post_all(d, n, eps_w, eps_p, omega);
    r.q_min_universal_post_most = q_min_universal_post_most(d, eps_w, omega);
    r.q_min_universal_concurrent_all =
        q_min_universal_concurrent_all(n, eps_w, omega);
    r.q_min_universal_concurrent_most =
        q_min_universal_concurrent_most(eps_w, omega);
    r.q = q > 0 ? q : r.q_min_universal_post_most;
    r.fail_prob_post_most = fail_prob_post_most(n, d, r.q, eps_w, omega);
    r.fail_prob_concurrent_most =
        fail_prob_concurrent_most(n, r.q, eps_w, omega);
    const auto ceiling = poison_utility_ceiling_note(d, eps_p);
    std::ostringstream note;
    note.precision(6);
    if (ceiling.infinite) {
        note << "scale = inf (eps_p = 0); " << ceiling.note;
    } else {
        note << "scale = " << ceiling.scale << "; " << ceiling.note;
    }
    r.q_max_poison_utility_note = note.str();
    return r;
}

std::string BoundReport::to_json() const {
    nlohmann::json j{
        {"d", d},
        {"n", n},
        {"q", q},
        {"eps_w", eps_w},
        {"eps_p", eps_p},
        {"omega", omega},
        {"q_min_sample_post", q_min_sample_post},
        {"q_min_sample_concurrent", q_min_sample_concurrent},
        {"q_min_universal_post_all", q_min_universal_post_all},
        {"q_min_universal_post_most", q_min_universal_post_most},
        {"q_min_universal_concurrent_all", q_min_universal_concurrent_all},
        {"q_min_universal_concurrent_most", q_min_universal_concurrent_most},
        {"fail_prob_post_most",
         {{"value", fail_prob_post_most.value},
          {"vacuous", fail_prob_post_most.vacuous}}},
        {"fail_prob_concurrent_most",
         {{"value", fail_prob_concurrent_most.value},
          {"vacuous", fail_prob_concurrent_most.vacuous}}},
        {"q_max_poison_utility_note", q_max_poison_utility_note}};
    return j.dump(2) + "\n";
}

std::string BoundReport::to_table() const {
    std::ostringstream os;
    os.precision(10);
    auto row = [&os](const std::string& name, const std::string& value) {
        os << "  " << name;
        for (std::size_t i = name.size(); i < 36; ++i) os << ' ';
        os << value << "\n";
    };
    os << "bound report (d=" << d << ", N=" << n << ", q=" << q
       << ", eps_w=" << eps_w << ", eps_p=" << eps_p << ", omega=" << omega
       << ")\n";
    row("q_min_sample_post", std::to_string(q_min_sample_post));
    row("q_min_sample_concurrent", std::to_string(q_min_sample_concurrent));
    row("q_min_universal_post_all", std::to_string(q_min_universal_post_all));
    row("q_min_universal_post_most", std::to_string(q_min_universal_post_most));
    row("q_min_universal_concurrent_all",
        std::to_string(q_min_universal_concurrent_all));
    row("q_min_universal_concurrent_most",
        std::to_string(q_min_universal_concurrent_most));
    {
        std::ostringstream v;
        v.precision(10);
        v << fail_prob_post_most.value
          << (fail_prob_post_most.vacuous ? " (vacuous)" : "");
        row("fail_prob_post_most", v.str());
    }
    {
        std::ostringstream v;
        v.precision(10);
        v << fail_prob_concurrent_most.value
          << (fail_prob_concurrent_most.vacuous ? " (vacuous)" : "");
        row("fail_prob_concurrent_most", v.str());
    }
    row("poison_utility_ceiling", q_max_poison_utility_note);
    return os.str();
}

}  // namespace poisonmark
