#include "tsmark/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <json.hpp>

#include "internal_io.hpp"

namespace tsmark {

using nlohmann::json;

std::string to_string(NoiseMode mode) { return mode == NoiseMode::hard ? "hard" : "soft"; }

NoiseMode noise_mode_from_string(const std::string& s) {
    if (s == "hard") return NoiseMode::hard;
    if (s == "soft") return NoiseMode::soft;
    throw ConfigError("unknown noise mode: " + s);
}

std::string to_string(NoiseOptimizer opt) {
    return opt == NoiseOptimizer::projected_gd ? "projected_gd" : "projected_adam";
}

NoiseOptimizer noise_optimizer_from_string(const std::string& s) {
    if (s == "projected_gd") return NoiseOptimizer::projected_gd;
    if (s == "projected_adam") return NoiseOptimizer::projected_adam;
    throw ConfigError("unknown optimizer: " + s);
}

void EmbedConfig::validate() const {
    if (alpha < 1) throw ConfigError("alpha must be >= 1");
    if (eta < 0.0) throw ConfigError("eta must be >= 0");
    if (step <= 0.0) throw ConfigError("step must be > 0");
    if (iters < 1) throw ConfigError("iters must be >= 1");
    if (lambda_soft < 0.0) throw ConfigError("lambda_soft must be >= 0");
}

std::vector<std::pair<int, int>> select_locations(const std::vector<double>& horizon,
                                                  const PatchEncoderModel& model,
                                                  const TokenTable& table,
                                                  const WatermarkBook& book, int alpha) {
    verify_book_model(book, model);
    if (horizon.size() < static_cast<std::size_t>(model.patch_len()))
        throw DataError("horizon shorter than patch length");

    PatchConfig grid{model.patch_len(), model.patch_len()};
    auto patches = patchify(horizon, grid);
    if (alpha < 1 || static_cast<std::size_t>(alpha) > patches.size())
        throw DataError("alpha " + std::to_string(alpha) + " exceeds available patches (" +
                        std::to_string(patches.size()) + ")");

    Eigen::MatrixXd sims = sim_matrix(patches, model, table, book.cold_token_ids);

    // All candidate pairs ordered by (similarity desc, patch asc, token
    // asc); greedily keep the best pair per patch. Because each patch's
    // best token precedes its other tokens, this is the max-total-sim
    // selection with at most one pair per patch.
    struct Cand {
        double sim;
        int patch;
        int token;
    };
    std::vector<Cand> cands;
    cands.reserve(static_cast<std::size_t>(sims.size()));
    for (Eigen::Index j = 0; j < sims.rows(); ++j)
        for (Eigen::Index i = 0; i < sims.cols(); ++i)
            cands.push_back({sims(j, i), static_cast<int>(j), book.cold_token_ids[static_cast<std::size_t>(i)]});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return std::tie(b.sim, a.patch, a.token) < std::tie(a.sim, b.patch, b.token);
    });

    std::vector<bool> used(patches.size(), false);
    std::vector<std::pair<int, int>> selected;
    for (const Cand& c : cands) {
        if (static_cast<int>(selected.size()) == alpha) break;
        if (used[static_cast<std::size_t>(c.patch)]) continue;
        used[static_cast<std::size_t>(c.patch)] = true;
        selected.emplace_back(c.patch, c.token);
    }
    return selected;
}

namespace {

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    int t = 0;
};

Eigen::VectorXd optimizer_update(const Eigen::VectorXd& eps, const Eigen::VectorXd& grad,
                                 const EmbedConfig& cfg, AdamState& adam) {
    if (cfg.optimizer == NoiseOptimizer::projected_gd) return eps - cfg.step * grad;
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double adam_eps = 1e-8;
    ++adam.t;
    adam.m = beta1 * adam.m + (1.0 - beta1) * grad;
    adam.v = beta2 * adam.v + (1.0 - beta2) * grad.cwiseProduct(grad).eval();
    Eigen::VectorXd m_hat = adam.m / (1.0 - std::pow(beta1, adam.t));
    Eigen::VectorXd v_hat = adam.v / (1.0 - std::pow(beta2, adam.t));
    Eigen::VectorXd denom = (v_hat.array().sqrt() + adam_eps).matrix();
    return eps - cfg.step * m_hat.cwiseQuotient(denom);
}

NoiseResult run_optimizer(const Eigen::VectorXd& segment, const Eigen::VectorXd& target,
                          const PatchEncoderModel& model, const EmbedConfig& cfg, bool project) {
    cfg.validate();
    NoiseResult out;
    out.epsilon = Eigen::VectorXd::Zero(segment.size());
    out.sim_trace.reserve(static_cast<std::size_t>(cfg.iters) + 1);

    AdamState adam;
    adam.m = Eigen::VectorXd::Zero(segment.size());
    adam.v = Eigen::VectorXd::Zero(segment.size());

    AlignmentGradient g = grad_alignment_loss(segment, out.epsilon, target, model);
    out.sim_trace.push_back(g.sim);
    out.degenerate = g.degenerate;

    for (int it = 0; it < cfg.iters; ++it) {
        Eigen::VectorXd grad = g.grad;
        if (!project && cfg.lambda_soft > 0.0) {
            double ne = out.epsilon.norm();
            if (ne > 0.0) grad += cfg.lambda_soft * out.epsilon / ne; // subgradient 0 at eps = 0
        }
        if (!grad.allFinite())
            throw NumericError("non-finite gradient during noise optimization");

        out.epsilon = optimizer_update(out.epsilon, grad, cfg, adam);
        if (project) {
            for (Eigen::Index i = 0; i < out.epsilon.size(); ++i)
                out.epsilon(i) = std::clamp(out.epsilon(i), -cfg.eta, cfg.eta);
        }
        if (!out.epsilon.allFinite())
            throw NumericError("non-finite noise during optimization");

        g = grad_alignment_loss(segment, out.epsilon, target, model);
        out.sim_trace.push_back(g.sim);
        out.degenerate = out.degenerate || g.degenerate;
    }
    return out;
}

} // namespace

NoiseResult optimize_noise_hard(const Eigen::VectorXd& segment, const Eigen::VectorXd& target,
                                const PatchEncoderModel& model, const EmbedConfig& cfg) {
    if (cfg.mode != NoiseMode::hard) throw ConfigError("optimize_noise_hard requires hard mode");
    return run_optimizer(segment, target, model, cfg, /*project=*/true);
}

NoiseResult optimize_noise_soft(const Eigen::VectorXd& segment, const Eigen::VectorXd& target,
                                const PatchEncoderModel& model, const EmbedConfig& cfg) {
    if (cfg.mode != NoiseMode::soft) throw ConfigError("optimize_noise_soft requires soft mode");
    return run_optimizer(segment, target, model, cfg, /*project=*/false);
}

EmbedResult embed(const std::vector<double>& horizon, const PatchEncoderModel& model,
                  const TokenTable& table, const WatermarkBook& book, const EmbedConfig& cfg) {
    cfg.validate();
    auto selected = select_locations(horizon, model, table, book, cfg.alpha);

    std::size_t p = static_cast<std::size_t>(model.patch_len());
    EmbedResult out;
    out.horizon = horizon;
    out.plan.config = cfg;
    out.plan.model_fingerprint = model.fingerprint;

    for (auto [patch_index, token_id] : selected) {
        std::size_t begin = static_cast<std::size_t>(patch_index) * p;
        std::size_t end = std::min(begin + p, horizon.size());

        // Segment as the encoder sees it: padded by the last value when
        // the final patch overruns the horizon.
        Eigen::VectorXd segment(static_cast<Eigen::Index>(p));
        for (std::size_t t = 0; t < p; ++t) {
            std::size_t idx = begin + t;
            segment(static_cast<Eigen::Index>(t)) = idx < horizon.size() ? horizon[idx]
                                                                         : horizon.back();
        }
        Eigen::VectorXd target = table.embeddings.row(token_id).transpose();

        NoiseResult noise = cfg.mode == NoiseMode::hard
                                ? optimize_noise_hard(segment, target, model, cfg)
                                : optimize_noise_soft(segment, target, model, cfg);

        PlanEntry entry;
        entry.patch_index = patch_index;
        entry.seg_begin = begin;
        entry.seg_end = end;
        entry.target_token_id = token_id;
        entry.initial_sim = noise.initial_sim();
        entry.final_sim = noise.final_sim();
        entry.epsilon.assign(noise.epsilon.data(), noise.epsilon.data() + noise.epsilon.size());

        // Padded tail positions past the horizon receive no noise.
        for (std::size_t t = 0; begin + t < end; ++t) out.horizon[begin + t] += entry.epsilon[t];
        out.plan.entries.push_back(std::move(entry));
    }
    return out;
}

namespace {

json embed_config_to_json(const EmbedConfig& cfg) {
    return json{{"alpha", cfg.alpha},
                {"eta", cfg.eta},
                {"step", cfg.step},
                {"iters", cfg.iters},
                {"optimizer", to_string(cfg.optimizer)},
                {"lambda_soft", cfg.lambda_soft},
                {"mode", to_string(cfg.mode)}};
}

EmbedConfig embed_config_from_json(const json& j) {
    EmbedConfig cfg;
    cfg.alpha = j.at("alpha").get<int>();
    cfg.eta = j.at("eta").get<double>();
    cfg.step = j.at("step").get<double>();
    cfg.iters = j.at("iters").get<int>();
    cfg.optimizer = noise_optimizer_from_string(j.at("optimizer").get<std::string>());
    cfg.lambda_soft = j.at("lambda_soft").get<double>();
    cfg.mode = noise_mode_from_string(j.at("mode").get<std::string>());
    return cfg;
}

} // namespace

std::string plan_to_json(const WatermarkPlan& plan) {
    json entries = json::array();
    for (const auto& e : plan.entries) {
        entries.push_back(json{{"patch_index", e.patch_index},
                               {"seg_begin", e.seg_begin},
                               {"seg_end", e.seg_end},
                               {"target_token_id", e.target_token_id},
                               {"initial_sim", e.initial_sim},
                               {"final_sim", e.final_sim},
                               {"epsilon", e.epsilon}});
    }
    json j{{"entries", entries},
           {"config", embed_config_to_json(plan.config)},
           {"model_fingerprint", plan.model_fingerprint}};
    return j.dump(2) + "\n";
}

WatermarkPlan plan_from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        WatermarkPlan plan;
        plan.config = embed_config_from_json(j.at("config"));
        plan.model_fingerprint = j.at("model_fingerprint").get<std::string>();
        for (const auto& ej : j.at("entries")) {
            PlanEntry e;
            e.patch_index = ej.at("patch_index").get<int>();
            e.seg_begin = ej.at("seg_begin").get<std::size_t>();
            e.seg_end = ej.at("seg_end").get<std::size_t>();
            e.target_token_id = ej.at("target_token_id").get<int>();
            e.initial_sim = ej.at("initial_sim").get<double>();
            e.final_sim = ej.at("final_sim").get<double>();
            e.epsilon = ej.at("epsilon").get<std::vector<double>>();
            plan.entries.push_back(std::move(e));
        }
        return plan;
    } catch (const json::exception& e) {
        throw DataError(std::string("plan schema error: ") + e.what());
    }
}

void save_plan(const std::string& path, const WatermarkPlan& plan) {
    detail::write_file(path, plan_to_json(plan));
}

WatermarkPlan load_plan(const std::string& path) {
    return plan_from_json(detail::read_file(path));
}

} // namespace tsmark
