#include "model/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "core/rng.hpp"

namespace axf {

namespace {

Tensor scaled_uniform(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

EmbedParams init_embed(int64_t d_in, int64_t d, Rng& rng) {
    return {scaled_uniform({d_in, d}, d_in, rng), Tensor({d})};
}

HeadParams init_head(int64_t d, int64_t k, Rng& rng) { return {scaled_uniform({d, k}, d, rng), Tensor({k})}; }

}  // namespace

Model Model::init(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.config = cfg;
    Rng rng(cfg.init_seed);
    const int64_t d = cfg.latent_dim;
    const auto& dims = cfg.dims;
    const auto& ab = cfg.ablation;

    if (!ab.temporal_attention) {
        // pre-game features are folded into every step's features
        m.embed_player = init_embed(dims.player + dims.player_strength, d, rng);
        m.embed_team = init_embed(dims.team + dims.team_strength, d, rng);
        m.embed_game = init_embed(dims.game + dims.game_context, d, rng);
    } else if (!ab.pregame) {
        m.embed_player = init_embed(dims.player, d, rng);
        m.embed_team = init_embed(dims.team, d, rng);
        m.embed_game = init_embed(dims.game, d, rng);
    } else {
        m.embed_player = init_embed(dims.player, d, rng);
        m.embed_player_strength = init_embed(dims.player_strength, d, rng);
        m.embed_team = init_embed(dims.team, d, rng);
        m.embed_team_strength = init_embed(dims.team_strength, d, rng);
        m.embed_game = init_embed(dims.game, d, rng);
        m.embed_game_context = init_embed(dims.game_context, d, rng);
    }

    m.layers.resize(static_cast<size_t>(cfg.layers));
    for (auto& l : m.layers) {
        l.wq = scaled_uniform({d, d}, d, rng);
        l.wk = scaled_uniform({d, d}, d, rng);
        l.wv = scaled_uniform({d, d}, d, rng);
        if (ab.variant == AttentionVariant::Stacked) {
            l.wq_col = scaled_uniform({d, d}, d, rng);
            l.wk_col = scaled_uniform({d, d}, d, rng);
            l.wv_col = scaled_uniform({d, d}, d, rng);
            l.ln_mid_gain = Tensor::full({d}, 1.0);
            l.ln_mid_bias = Tensor({d});
        }
        l.ln_attn_gain = Tensor::full({d}, 1.0);
        l.ln_attn_bias = Tensor({d});
        l.ln_ff_gain = Tensor::full({d}, 1.0);
        l.ln_ff_bias = Tensor({d});
        l.ff1_w = scaled_uniform({d, cfg.ff_hidden}, d, rng);
        l.ff1_b = Tensor({cfg.ff_hidden});
        l.ff2_w = scaled_uniform({cfg.ff_hidden, d}, cfg.ff_hidden, rng);
        l.ff2_b = Tensor({d});
    }

    for (const auto& h : cfg.action_heads) {
        m.player_heads.push_back(init_head(d, h.dist.param_count(), rng));
        m.team_heads.push_back(init_head(d, h.dist.param_count(), rng));
    }
    m.outcome_head = init_head(d, cfg.outcome.param_count(), rng);
    return m;
}

void Model::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
    auto visit = [&fn](const std::string& name, Tensor& t) {
        if (!t.empty()) fn(name, t);
    };
    visit("embed.player.w", embed_player.w);
    visit("embed.player.b", embed_player.b);
    visit("embed.player_strength.w", embed_player_strength.w);
    visit("embed.player_strength.b", embed_player_strength.b);
    visit("embed.team.w", embed_team.w);
    visit("embed.team.b", embed_team.b);
    visit("embed.team_strength.w", embed_team_strength.w);
    visit("embed.team_strength.b", embed_team_strength.b);
    visit("embed.game.w", embed_game.w);
    visit("embed.game.b", embed_game.b);
    visit("embed.game_context.w", embed_game_context.w);
    visit("embed.game_context.b", embed_game_context.b);
    for (size_t li = 0; li < layers.size(); ++li) {
        const std::string p = "layer." + std::to_string(li) + ".";
        LayerParams& l = layers[li];
        visit(p + "wq", l.wq);
        visit(p + "wk", l.wk);
        visit(p + "wv", l.wv);
        visit(p + "wq_col", l.wq_col);
        visit(p + "wk_col", l.wk_col);
        visit(p + "wv_col", l.wv_col);
        visit(p + "ln_attn.gain", l.ln_attn_gain);
        visit(p + "ln_attn.bias", l.ln_attn_bias);
        visit(p + "ln_mid.gain", l.ln_mid_gain);
        visit(p + "ln_mid.bias", l.ln_mid_bias);
        visit(p + "ln_ff.gain", l.ln_ff_gain);
        visit(p + "ln_ff.bias", l.ln_ff_bias);
        visit(p + "ff1.w", l.ff1_w);
        visit(p + "ff1.b", l.ff1_b);
        visit(p + "ff2.w", l.ff2_w);
        visit(p + "ff2.b", l.ff2_b);
    }
    for (size_t ai = 0; ai < player_heads.size(); ++ai) {
        const std::string action = config.action_heads[ai].action;
        visit("head.player." + action + ".w", player_heads[ai].w);
        visit("head.player." + action + ".b", player_heads[ai].b);
        visit("head.team." + action + ".w", team_heads[ai].w);
        visit("head.team." + action + ".b", team_heads[ai].b);
    }
    visit("head.outcome.w", outcome_head.w);
    visit("head.outcome.b", outcome_head.b);
}

void Model::for_each_param(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    const_cast<Model*>(this)->for_each_param([&fn](const std::string& n, Tensor& t) { fn(n, t); });
}

std::vector<std::string> Model::param_names() const {
    std::vector<std::string> names;
    for_each_param([&names](const std::string& n, const Tensor&) { names.push_back(n); });
    return names;
}

int64_t Model::param_count() const {
    int64_t n = 0;
    for_each_param([&n](const std::string&, const Tensor& t) { n += t.numel(); });
    return n;
}

Tensor* Model::param_by_name(const std::string& name) {
    Tensor* found = nullptr;
    for_each_param([&](const std::string& n, Tensor& t) {
        if (n == name) found = &t;
    });
    return found;
}

namespace {

// value-level feature concat over the trailing dim: [N x T x A], [N x B] -> [N x T x (A+B)]
Tensor concat_steps_static(const Tensor& steps, const Tensor& fixed) {
    const int64_t n = steps.dim(0), t = steps.dim(1), a = steps.dim(2), b = fixed.dim(1);
    Tensor out({n, t, a + b});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < t; ++j) {
            double* dst = out.data() + (i * t + j) * (a + b);
            std::memcpy(dst, steps.data() + (i * t + j) * a, sizeof(double) * static_cast<size_t>(a));
            std::memcpy(dst + a, fixed.data() + i * b, sizeof(double) * static_cast<size_t>(b));
        }
    return out;
}

Tensor concat_vec(const Tensor& steps, const Tensor& fixed) {  // [T x A], [A2] -> [T x (A+A2)]
    const int64_t t = steps.dim(0), a = steps.dim(1), b = fixed.dim(0);
    Tensor out({t, a + b});
    for (int64_t j = 0; j < t; ++j) {
        double* dst = out.data() + j * (a + b);
        std::memcpy(dst, steps.data() + j * a, sizeof(double) * static_cast<size_t>(a));
        std::memcpy(dst + a, fixed.data(), sizeof(double) * static_cast<size_t>(b));
    }
    return out;
}

void check_dim(const char* name, int64_t got, int64_t want) {
    if (got != want)
        throw DimensionError(std::string("input tensor '") + name + "' has feature dim " + std::to_string(got) +
                             ", config expects " + std::to_string(want));
}

}  // namespace

BoundParams Model::bind(Tape& tape) const {
    BoundParams bound;
    for_each_param([&](const std::string& name, const Tensor& t) {
        const VarId id = tape.leaf(t, true);
        bound.ids.push_back({name, id});
        bound.by_name.emplace(name, id);
    });
    return bound;
}

ModelForward Model::forward(Tape& tape, const MatchInputs& x, const MatchValidity* validity, bool inputs_grad,
                            const BoundParams* bound) const {
    const auto& ab = config.ablation;
    const int64_t p = x.players(), t_steps = x.steps();
    if (t_steps < 1 || p < 1) throw DimensionError("forward needs at least one player and one step");
    if (x.team.dim(0) != 2) throw DimensionError("team tensor must have two rows");
    check_dim("player", x.player.dim(2), config.dims.player);
    check_dim("team", x.team.dim(2), config.dims.team);
    check_dim("game", x.game.dim(1), config.dims.game);
    if (ab.pregame) {
        check_dim("player_strength", x.player_strength.dim(1), config.dims.player_strength);
        check_dim("team_strength", x.team_strength.dim(1), config.dims.team_strength);
        check_dim("game_context", x.game_context.dim(0), config.dims.game_context);
    }

    ModelForward out;
    out.has_pregame = ab.temporal_attention && ab.pregame;
    out.height = p + 3;
    out.width = out.has_pregame ? t_steps + 1 : t_steps;

    if (bound) out.param_ids = bound->ids;
    std::vector<std::pair<std::string, VarId>>* bind_out = &out.param_ids;
    auto P = [&tape, bind_out, bound](const std::string& name, const Tensor& w) {
        if (bound) {
            auto it = bound->by_name.find(name);
            if (it == bound->by_name.end()) throw ValidationError("parameter not bound: " + name);
            return it->second;
        }
        const VarId id = tape.leaf(w, true);
        bind_out->push_back({name, id});
        return id;
    };

    // embeddings
    VarId grid;
    if (!ab.temporal_attention) {
        const Tensor player_cat = concat_steps_static(x.player, x.player_strength);
        const Tensor team_cat = concat_steps_static(x.team, x.team_strength);
        const Tensor game_cat = concat_vec(x.game, x.game_context);
        const VarId pl = tape.leaf(player_cat, inputs_grad);
        const VarId tm = tape.leaf(team_cat, inputs_grad);
        const VarId gm = tape.leaf(game_cat, inputs_grad);
        const VarId pe = tape.linear(pl, P("embed.player.w", embed_player.w), P("embed.player.b", embed_player.b));
        const VarId te = tape.linear(tm, P("embed.team.w", embed_team.w), P("embed.team.b", embed_team.b));
        const VarId ge = tape.linear(gm, P("embed.game.w", embed_game.w), P("embed.game.b", embed_game.b));
        grid = tape.assemble_grid_live(ge, te, pe);
    } else if (!ab.pregame) {
        const VarId pl = tape.leaf(x.player, inputs_grad);
        const VarId tm = tape.leaf(x.team, inputs_grad);
        const VarId gm = tape.leaf(x.game, inputs_grad);
        const VarId pe = tape.linear(pl, P("embed.player.w", embed_player.w), P("embed.player.b", embed_player.b));
        const VarId te = tape.linear(tm, P("embed.team.w", embed_team.w), P("embed.team.b", embed_team.b));
        const VarId ge = tape.linear(gm, P("embed.game.w", embed_game.w), P("embed.game.b", embed_game.b));
        grid = tape.assemble_grid_live(ge, te, pe);
    } else {
        const VarId pl = tape.leaf(x.player, inputs_grad);
        const VarId ps = tape.leaf(x.player_strength, inputs_grad);
        const VarId tm = tape.leaf(x.team, inputs_grad);
        const VarId ts = tape.leaf(x.team_strength, inputs_grad);
        const VarId gm = tape.leaf(x.game, inputs_grad);
        const VarId gc = tape.leaf(x.game_context, inputs_grad);
        const VarId pe = tape.linear(pl, P("embed.player.w", embed_player.w), P("embed.player.b", embed_player.b));
        const VarId pse = tape.linear(ps, P("embed.player_strength.w", embed_player_strength.w),
                                      P("embed.player_strength.b", embed_player_strength.b));
        const VarId te = tape.linear(tm, P("embed.team.w", embed_team.w), P("embed.team.b", embed_team.b));
        const VarId tse = tape.linear(ts, P("embed.team_strength.w", embed_team_strength.w),
                                      P("embed.team_strength.b", embed_team_strength.b));
        const VarId ge = tape.linear(gm, P("embed.game.w", embed_game.w), P("embed.game.b", embed_game.b));
        const VarId gce = tape.linear(gc, P("embed.game_context.w", embed_game_context.w),
                                      P("embed.game_context.b", embed_game_context.b));
        grid = tape.assemble_grid(gce, ge, tse, te, pse, pe);
    }

    // masks (validity-aware when padded): game/team rows and the pre-game
    // column are always live
    std::vector<uint8_t> agent_valid(static_cast<size_t>(out.height), 1);
    std::vector<uint8_t> step_valid(static_cast<size_t>(out.width), 1);
    if (validity) {
        if (static_cast<int64_t>(validity->players.size()) != p ||
            static_cast<int64_t>(validity->steps.size()) != t_steps)
            throw DimensionError("validity vectors do not match match dims");
        for (int64_t pi = 0; pi < p; ++pi) agent_valid[static_cast<size_t>(3 + pi)] = validity->players[static_cast<size_t>(pi)];
        const int64_t col0 = out.has_pregame ? 1 : 0;
        for (int64_t st = 0; st < t_steps; ++st)
            step_valid[static_cast<size_t>(col0 + st)] = validity->steps[static_cast<size_t>(st)];
    }
    const AxialMaskSet masks = build_forecast_masks(out.height, out.width, 0, agent_valid, step_valid);

    // axial transformer layers
    for (size_t li = 0; li < layers.size(); ++li) {
        const LayerParams& l = layers[li];
        const std::string pre = "layer." + std::to_string(li) + ".";
        const VarId wq = P(pre + "wq", l.wq);
        const VarId wk = P(pre + "wk", l.wk);
        const VarId wv = P(pre + "wv", l.wv);

        VarId attended;
        if (ab.variant == AttentionVariant::Stacked) {
            const VarId r1 = tape.grid_axis_attention(grid, wq, wk, wv, masks.row_masks, GridAxis::Row, config.heads);
            const VarId x1 = tape.layer_norm(tape.add(grid, r1), P(pre + "ln_attn.gain", l.ln_attn_gain),
                                             P(pre + "ln_attn.bias", l.ln_attn_bias));
            const VarId wq2 = P(pre + "wq_col", l.wq_col);
            const VarId wk2 = P(pre + "wk_col", l.wk_col);
            const VarId wv2 = P(pre + "wv_col", l.wv_col);
            const VarId r2 = tape.grid_axis_attention(x1, wq2, wk2, wv2, masks.col_masks, GridAxis::Col, config.heads);
            attended = tape.layer_norm(tape.add(x1, r2), P(pre + "ln_mid.gain", l.ln_mid_gain),
                                       P(pre + "ln_mid.bias", l.ln_mid_bias));
        } else {
            VarId r;
            if (ab.temporal_attention && ab.agent_attention)
                r = tape.axial_additive_attention(grid, wq, wk, wv, masks, config.heads);
            else if (ab.temporal_attention)
                r = tape.grid_axis_attention(grid, wq, wk, wv, masks.row_masks, GridAxis::Row, config.heads);
            else
                r = tape.grid_axis_attention(grid, wq, wk, wv, masks.col_masks, GridAxis::Col, config.heads);
            attended = tape.layer_norm(tape.add(grid, r), P(pre + "ln_attn.gain", l.ln_attn_gain),
                                       P(pre + "ln_attn.bias", l.ln_attn_bias));
        }
        const VarId h = tape.relu(tape.linear(attended, P(pre + "ff1.w", l.ff1_w), P(pre + "ff1.b", l.ff1_b)));
        const VarId ff = tape.linear(h, P(pre + "ff2.w", l.ff2_w), P(pre + "ff2.b", l.ff2_b));
        grid = tape.layer_norm(tape.add(attended, ff), P(pre + "ln_ff.gain", l.ln_ff_gain),
                               P(pre + "ln_ff.bias", l.ln_ff_bias));
    }
    out.grid = grid;

    // target layers
    const VarId game_row = tape.slice_rows(grid, 0, 1);
    const VarId team_rows = tape.slice_rows(grid, 1, 3);
    const VarId player_rows = tape.slice_rows(grid, 3, out.height);
    for (size_t ai = 0; ai < config.action_heads.size(); ++ai) {
        const std::string& action = config.action_heads[ai].action;
        out.player_raw.push_back(tape.linear(player_rows, P("head.player." + action + ".w", player_heads[ai].w),
                                             P("head.player." + action + ".b", player_heads[ai].b)));
        out.team_raw.push_back(tape.linear(team_rows, P("head.team." + action + ".w", team_heads[ai].w),
                                           P("head.team." + action + ".b", team_heads[ai].b)));
    }
    const VarId outcome3 = tape.linear(game_row, P("head.outcome.w", outcome_head.w), P("head.outcome.b", outcome_head.b));
    out.outcome_raw = tape.reshape(outcome3, {out.width, config.outcome.param_count()});
    return out;
}

ForecastOutput Model::predict(const MatchInputs& x) const {
    Tape tape(false);
    const ModelForward f = forward(tape, x);
    ForecastOutput out;
    out.has_pregame = f.has_pregame;
    const int64_t w = f.width;
    const int64_t p = x.players();

    for (size_t ai = 0; ai < config.action_heads.size(); ++ai) {
        const DistSpec& spec = config.action_heads[ai].dist;
        const int64_t k = spec.param_count();
        ForecastOutput::ActionForecast fc;
        fc.action = config.action_heads[ai].action;
        fc.dist = spec;
        fc.player_params = Tensor({p, w, k});
        fc.team_params = Tensor({2, w, k});
        const Tensor& praw = tape.val(f.player_raw[ai]);
        const Tensor& traw = tape.val(f.team_raw[ai]);
        auto constrain = [&spec, k](const double* raw, double* dst) {
            const Distribution d = Distribution::from_raw(spec, raw);
            for (int64_t i = 0; i < k; ++i) dst[i] = d.params[static_cast<size_t>(i)];
        };
        for (int64_t i = 0; i < p * w; ++i) constrain(praw.data() + i * k, fc.player_params.data() + i * k);
        for (int64_t i = 0; i < 2 * w; ++i) constrain(traw.data() + i * k, fc.team_params.data() + i * k);
        out.actions.push_back(std::move(fc));
    }

    const Tensor& oraw = tape.val(f.outcome_raw);
    out.outcome_probs = Tensor({w, config.outcome.param_count()});
    for (int64_t t = 0; t < w; ++t)
        discrete_probs_from_raw(oraw.data() + t * config.outcome.param_count(), config.outcome.param_count(),
                                out.outcome_probs.data() + t * config.outcome.param_count());
    return out;
}

int64_t ForecastOutput::predictions_per_step() const {
    return static_cast<int64_t>(actions.size()) * (players() + 2) + 1;
}

Distribution ForecastOutput::player_dist(size_t action, int64_t p, int64_t t) const {
    const auto& a = actions[action];
    Distribution d;
    d.family = a.dist.family;
    const int64_t k = a.dist.param_count();
    d.params.assign(a.player_params.data() + (p * a.player_params.dim(1) + t) * k,
                    a.player_params.data() + (p * a.player_params.dim(1) + t) * k + k);
    return d;
}

Distribution ForecastOutput::team_dist(size_t action, int64_t row, int64_t t) const {
    const auto& a = actions[action];
    Distribution d;
    d.family = a.dist.family;
    const int64_t k = a.dist.param_count();
    d.params.assign(a.team_params.data() + (row * a.team_params.dim(1) + t) * k,
                    a.team_params.data() + (row * a.team_params.dim(1) + t) * k + k);
    return d;
}

Tensor embed_inputs(const MatchInputs& x, const EmbedParams& game_ctx, const EmbedParams& game,
                    const EmbedParams& team_str, const EmbedParams& team, const EmbedParams& player_str,
                    const EmbedParams& player) {
    Tape tape(false);
    const VarId pe = tape.linear(tape.leaf(x.player), tape.leaf(player.w), tape.leaf(player.b));
    const VarId pse = tape.linear(tape.leaf(x.player_strength), tape.leaf(player_str.w), tape.leaf(player_str.b));
    const VarId te = tape.linear(tape.leaf(x.team), tape.leaf(team.w), tape.leaf(team.b));
    const VarId tse = tape.linear(tape.leaf(x.team_strength), tape.leaf(team_str.w), tape.leaf(team_str.b));
    const VarId ge = tape.linear(tape.leaf(x.game), tape.leaf(game.w), tape.leaf(game.b));
    const VarId gce = tape.linear(tape.leaf(x.game_context), tape.leaf(game_ctx.w), tape.leaf(game_ctx.b));
    const VarId grid = tape.assemble_grid(gce, ge, tse, te, pse, pe);
    return tape.val(grid);
}

TotalsForecast predict_totals(const ForecastOutput& out, const RunningCounts& running) {
    const int64_t p = out.players();
    const int64_t w = out.steps();
    const int64_t a = static_cast<int64_t>(out.actions.size());
    // running counts are aligned with the full (pre-game first) layout
    const int64_t offset = out.has_pregame ? 0 : 1;
    if (running.player.dim(1) < w + offset) throw DimensionError("running counts narrower than forecasts");

    TotalsForecast tot;
    tot.player = Tensor({p, w, a});
    tot.team = Tensor({2, w, a});
    for (int64_t ai = 0; ai < a; ++ai) {
        for (int64_t pi = 0; pi < p; ++pi)
            for (int64_t t = 0; t < w; ++t) {
                const double run = running.player.at3(pi, t + offset, ai);
                tot.player.at3(pi, t, ai) = run + out.player_dist(static_cast<size_t>(ai), pi, t).mean();
            }
        for (int64_t row = 0; row < 2; ++row)
            for (int64_t t = 0; t < w; ++t) {
                const double run = running.team.at3(row, t + offset, ai);
                tot.team.at3(row, t, ai) = run + out.team_dist(static_cast<size_t>(ai), row, t).mean();
            }
    }
    return tot;
}

namespace {

constexpr char kCkptMagic[8] = {'A', 'X', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kCkptVersion = 1;

void write_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
void write_u64(std::ofstream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }

uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) throw ValidationError("checkpoint truncated");
    return v;
}
uint64_t read_u64(std::ifstream& in) {
    uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) throw ValidationError("checkpoint truncated");
    return v;
}

}  // namespace

void Model::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write checkpoint: " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    write_u32(out, kCkptVersion);
    const std::string cfg = config.to_json();
    write_u64(out, cfg.size());
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    uint64_t n = 0;
    for_each_param([&n](const std::string&, const Tensor&) { ++n; });
    write_u64(out, n);
    for_each_param([&out](const std::string& name, const Tensor& t) {
        write_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<uint32_t>(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) write_u64(out, static_cast<uint64_t>(t.dim(i)));
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    });
    if (!out) throw ValidationError("failed writing checkpoint: " + path);
}

Model Model::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw ValidationError("not an axf checkpoint: " + path);
    const uint32_t version = read_u32(in);
    if (version != kCkptVersion)
        throw ValidationError("checkpoint version " + std::to_string(version) + " unsupported");
    const uint64_t cfg_len = read_u64(in);
    std::string cfg_text(cfg_len, '\0');
    if (!in.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len))) throw ValidationError("checkpoint truncated");

    Model m = Model::init(ModelConfig::from_json(cfg_text));
    const uint64_t n = read_u64(in);
    std::vector<std::string> expected = m.param_names();
    if (n != expected.size())
        throw ValidationError("checkpoint holds " + std::to_string(n) + " tensors, model expects " +
                              std::to_string(expected.size()));
    for (uint64_t i = 0; i < n; ++i) {
        const uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw ValidationError("checkpoint truncated");
        const uint32_t ndim = read_u32(in);
        std::vector<int64_t> shape(ndim);
        for (uint32_t x = 0; x < ndim; ++x) shape[x] = static_cast<int64_t>(read_u64(in));
        Tensor* dst = m.param_by_name(name);
        if (!dst) throw ValidationError("checkpoint tensor '" + name + "' not in model");
        if (dst->shape() != shape)
            throw ValidationError("checkpoint tensor '" + name + "' shape mismatch: file " + shape_str(shape) +
                                  " vs model " + shape_str(dst->shape()));
        if (!in.read(reinterpret_cast<char*>(dst->data()),
                     static_cast<std::streamsize>(dst->numel() * sizeof(double))))
            throw ValidationError("checkpoint truncated in tensor '" + name + "'");
    }
    return m;
}

}  // namespace axf
