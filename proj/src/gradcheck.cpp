#include <random>

#include "you2me/model.hpp"

namespace you2me {

namespace {

std::vector<WindowData<double>> random_windows(const ModelConfig& cfg, std::mt19937_64& rng,
                                               const std::vector<int>& lengths) {
    std::vector<WindowData<double>> windows;
    for (int len : lengths) {
        WindowData<double> w;
        w.motion.resize(cfg.motion_dim, len);
        w.second_person.resize(cfg.second_person_dim, len);
        w.scene.resize(cfg.scene_dim, len);
        for (Eigen::Index c = 0; c < len; ++c) {
            for (Eigen::Index r = 0; r < cfg.motion_dim; ++r)
                w.motion(r, c) = next_gaussian(rng);
            for (Eigen::Index r = 0; r < cfg.second_person_dim; ++r)
                w.second_person(r, c) = next_unit(rng);
            for (Eigen::Index r = 0; r < cfg.scene_dim; ++r)
                w.scene(r, c) = next_gaussian(rng);
        }
        w.prev_ids.resize(len);
        for (int t = 0; t < len; ++t)
            w.prev_ids[t] = static_cast<int>(next_below(rng, cfg.num_classes));
        if (cfg.head == Head::Classification) {
            w.targets.resize(len);
            for (int t = 0; t < len; ++t)
                w.targets[t] = static_cast<int>(next_below(rng, cfg.num_classes));
        } else {
            w.reg_targets.resize(cfg.output_dim(), len);
            for (Eigen::Index c = 0; c < len; ++c)
                for (Eigen::Index r = 0; r < cfg.output_dim(); ++r)
                    w.reg_targets(r, c) = next_gaussian(rng);
        }
        windows.push_back(std::move(w));
    }
    return windows;
}

}  // namespace

GradCheckReport gradient_check(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    // Two windows of unequal length so the batch mask path is exercised.
    auto windows = random_windows(cfg, rng, {3, 2});
    ModelParams<double> params = ModelParams<double>::init(cfg, seed + 1);
    // Perturb batch-norm state away from the (0, 1) fixed point.
    for (Eigen::Index i = 0; i < params.bn_gamma.size(); ++i) {
        params.bn_gamma(i) = 0.5 + next_unit(rng);
        params.bn_beta(i) = next_gaussian(rng) * 0.1;
    }

    ModelParams<double> analytic = ModelParams<double>::zeros(cfg);
    analytic.set_zero();
    forward_backward<double>(windows, params, &analytic, /*normalize=*/false,
                             /*update_running=*/false);

    const double step = 1e-5;
    GradCheckReport report;
    auto pt = params.tensors();
    auto at = analytic.tensors();
    for (std::size_t i = 0; i < pt.size(); ++i) {
        double max_abs_diff = 0.0;
        double max_mag = 0.0;
        for (Eigen::Index k = 0; k < pt[i].size; ++k) {
            const double saved = pt[i].data[k];
            pt[i].data[k] = saved + step;
            const double up = forward_backward<double>(windows, params, nullptr, false, false).loss;
            pt[i].data[k] = saved - step;
            const double dn = forward_backward<double>(windows, params, nullptr, false, false).loss;
            pt[i].data[k] = saved;
            const double numeric = (up - dn) / (2.0 * step);
            const double a = at[i].data[k];
            max_abs_diff = std::max(max_abs_diff, std::abs(a - numeric));
            max_mag = std::max({max_mag, std::abs(a), std::abs(numeric)});
        }
        const double rel = max_abs_diff / std::max(max_mag, 1e-8);
        report.per_tensor.emplace_back(pt[i].name, rel);
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_tensor = pt[i].name;
        }
    }
    return report;
}

}  // namespace you2me
