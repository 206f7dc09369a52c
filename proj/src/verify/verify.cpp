#include "verify/verify.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "core/ops.hpp"
#include "core/tape.hpp"
#include "core/tensor.hpp"
#include "data/features.hpp"
#include "data/generator.hpp"
#include "model/model.hpp"
#include "train/loss.hpp"
#include "train/trainer.hpp"

namespace axf {

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

AxialMaskSet random_disjoint_masks(int64_t h, int64_t w, Rng& rng) {
    AxialMaskSet masks;
    masks.row_masks.reserve(static_cast<size_t>(h));
    masks.col_masks.reserve(static_cast<size_t>(w));
    for (int64_t i = 0; i < h; ++i) {
        MaskMatrix m(w, false);
        for (int64_t a = 0; a < w; ++a)
            for (int64_t b = 0; b < w; ++b) m.set(a, b, rng.uniform() < 0.6);
        masks.row_masks.push_back(std::move(m));
    }
    for (int64_t j = 0; j < w; ++j) {
        MaskMatrix m(h, false);
        for (int64_t a = 0; a < h; ++a)
            for (int64_t b = 0; b < h; ++b) m.set(a, b, rng.uniform() < 0.6);
        masks.col_masks.push_back(std::move(m));
    }
    for (int64_t i = 0; i < h; ++i) {
        for (int64_t j = 0; j < w; ++j) {
            MaskMatrix& row = masks.row_masks[static_cast<size_t>(i)];
            MaskMatrix& col = masks.col_masks[static_cast<size_t>(j)];
            // enforce disjointness: self open on at most one axis
            if (row.allows(j, j) && col.allows(i, i)) {
                if (rng.uniform() < 0.5)
                    row.set(j, j, false);
                else
                    col.set(i, i, false);
            }
            // keep every cell attendable somewhere
            if (row.row_fully_masked(j) && col.row_fully_masked(i)) {
                if (!row.allows(j, j)) {
                    col.set(i, i, true);
                } else if (w > 1) {
                    row.set(j, (j + 1) % w, true);
                } else {
                    row.set(j, j, false);
                    col.set(i, i, true);
                }
            }
        }
    }
    return masks;
}

bool VerifyReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string VerifyReport::to_string() const {
    std::ostringstream os;
    for (const auto& c : checks) os << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << c.detail << ")\n";
    return os.str();
}

CheckResult check_equivalence(int cases, uint64_t seed, double tol) {
    Rng rng(seed);
    double worst = 0.0;
    for (int rep = 0; rep < cases; ++rep) {
        const int64_t h = rng.range(1, 7), w = rng.range(1, 7);
        const int64_t dims[] = {1, 2, 4, 8};
        const int64_t d = dims[rng.range(0, 4)];
        Tensor grid = random_tensor({h, w, d}, rng);
        AxialMaskSet masks = random_disjoint_masks(h, w, rng);
        AxialAttentionLayer layer = AxialAttentionLayer::identity_attention(d);
        layer.wq = LinearMap(random_tensor({d, d}, rng));
        layer.wk = LinearMap(random_tensor({d, d}, rng));
        layer.wv = LinearMap(random_tensor({d, d}, rng));
        AxialAttentionResult axial = axial_attention(grid, masks, layer);
        Tensor oracle = sequential_oracle(grid, masks, layer);
        worst = std::max(worst, max_abs_diff(axial.out, oracle));
    }
    CheckResult r;
    r.name = "axial == sequential equivalence, " + std::to_string(cases) + " cases";
    r.pass = worst <= tol;
    r.detail = "max elementwise error " + fmt(worst) + ", tolerance " + fmt(tol);
    return r;
}

CheckResult check_permutation_equivariance(int cases, uint64_t seed, double tol) {
    Rng rng(seed);
    double worst = 0.0;
    for (int rep = 0; rep < cases; ++rep) {
        const int64_t s = rng.range(2, 8);
        Tensor a = random_tensor({s, s}, rng, -5.0, 5.0);
        std::vector<int64_t> perm(static_cast<size_t>(s));
        for (int64_t i = 0; i < s; ++i) perm[static_cast<size_t>(i)] = i;
        rng.shuffle(perm);

        Tensor pa({s, s}), ap({s, s});
        for (int64_t i = 0; i < s; ++i)
            for (int64_t j = 0; j < s; ++j) {
                pa.at2(i, j) = a.at2(perm[static_cast<size_t>(i)], j);
                ap.at2(i, j) = a.at2(i, perm[static_cast<size_t>(j)]);
            }
        SoftmaxResult base = softmax_rows(a);
        SoftmaxResult rows = softmax_rows(pa);
        SoftmaxResult cols = softmax_rows(ap);
        for (int64_t i = 0; i < s; ++i)
            for (int64_t j = 0; j < s; ++j) {
                worst = std::max(worst,
                                 std::fabs(rows.probs.at2(i, j) - base.probs.at2(perm[static_cast<size_t>(i)], j)));
                worst = std::max(worst,
                                 std::fabs(cols.probs.at2(i, j) - base.probs.at2(i, perm[static_cast<size_t>(j)])));
            }
    }
    CheckResult r;
    r.name = "softmax permutation equivariance, " + std::to_string(cases) + " cases";
    r.pass = worst <= tol;
    r.detail = "max error " + fmt(worst) + ", tolerance " + fmt(tol);
    return r;
}

CheckResult check_causality(int cases, uint64_t seed) {
    Rng rng(seed);
    int64_t mismatches = 0;
    for (int rep = 0; rep < cases; ++rep) {
        const int64_t h = rng.range(2, 6), w = rng.range(2, 8), d = rng.range(1, 5);
        Tensor grid = random_tensor({h, w, d}, rng);
        AxialMaskSet masks = build_forecast_masks(h, w, 0);
        AxialAttentionLayer layer = AxialAttentionLayer::identity_attention(d);
        layer.wq = LinearMap(random_tensor({d, d}, rng));
        layer.wk = LinearMap(random_tensor({d, d}, rng));
        layer.wv = LinearMap(random_tensor({d, d}, rng));
        AxialAttentionResult base = axial_attention(grid, masks, layer);
        const int64_t t = rng.range(1, w);
        Tensor perturbed = grid;
        for (int64_t i = 0; i < h; ++i)
            for (int64_t x = 0; x < d; ++x) perturbed.at3(i, t, x) += rng.uniform(0.5, 2.0);
        AxialAttentionResult out = axial_attention(perturbed, masks, layer);
        for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < t; ++j)
                for (int64_t x = 0; x < d; ++x)
                    if (out.out.at3(i, j, x) != base.out.at3(i, j, x)) ++mismatches;
    }
    CheckResult r;
    r.name = "causality under forecast masks, " + std::to_string(cases) + " perturbation cases";
    r.pass = mismatches == 0;
    r.detail = std::to_string(mismatches) + " non-bit-identical earlier outputs";
    return r;
}

CheckResult check_op_gradients(uint64_t seed, double tol) {
    Rng rng(seed);
    double worst = 0.0;
    std::string worst_op = "none";

    auto fd_check = [&](const char* op_name, std::vector<Tensor*> params,
                        const std::function<double(Tape&, std::vector<VarId>&)>& build) {
        Tape tape(true);
        std::vector<VarId> ids;
        ids.reserve(params.size());
        for (Tensor* p : params) ids.push_back(tape.leaf(*p, true));
        build(tape, ids);
        const VarId loss = static_cast<VarId>(tape.size() - 1);
        tape.backward(loss);
        auto eval = [&]() {
            Tape t2(false);
            std::vector<VarId> ids2;
            for (Tensor* p : params) ids2.push_back(t2.leaf(*p, false));
            return build(t2, ids2);
        };
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Tensor analytic = tape.grad(ids[pi]);
            Tensor& param = *params[pi];
            for (int64_t i = 0; i < param.numel(); ++i) {
                const double keep = param[i];
                const double step = 1e-5;
                param[i] = keep + step;
                const double up = eval();
                param[i] = keep - step;
                const double down = eval();
                param[i] = keep;
                const double fd = (up - down) / (2.0 * step);
                const double rel =
                    std::fabs(fd - analytic[i]) / std::max(1e-6, std::fabs(fd) + std::fabs(analytic[i]));
                if (rel > worst) {
                    worst = rel;
                    worst_op = op_name;
                }
            }
        }
    };

    {
        Tensor x = random_tensor({3, 4}, rng);
        Tensor w = random_tensor({4, 5}, rng);
        Tensor b = random_tensor({5}, rng);
        fd_check("linear/relu", {&x, &w, &b}, [](Tape& t, std::vector<VarId>& ids) {
            VarId s = t.sum(t.relu(t.linear(ids[0], ids[1], ids[2])));
            return t.val(s)[0];
        });
    }
    {
        Tensor x = random_tensor({2, 3, 6}, rng);
        Tensor g = random_tensor({6}, rng, 0.5, 1.5);
        Tensor b = random_tensor({6}, rng);
        fd_check("layer_norm", {&x, &g, &b}, [](Tape& t, std::vector<VarId>& ids) {
            VarId y = t.layer_norm(ids[0], ids[1], ids[2]);
            VarId s = t.sum(t.mul(y, y));
            return t.val(s)[0];
        });
    }
    {
        Tensor x = random_tensor({3, 3, 4}, rng);
        Tensor w1 = random_tensor({4, 6}, rng);
        Tensor b1 = random_tensor({6}, rng);
        Tensor w2 = random_tensor({6, 4}, rng);
        Tensor b2 = random_tensor({4}, rng);
        fd_check("feed_forward", {&x, &w1, &b1, &w2, &b2}, [](Tape& t, std::vector<VarId>& ids) {
            VarId h = t.relu(t.linear(ids[0], ids[1], ids[2]));
            VarId y = t.linear(h, ids[3], ids[4]);
            VarId s = t.sum(t.mul(y, y));
            return t.val(s)[0];
        });
    }
    {
        Tensor x = random_tensor({2, 5}, rng, -3.0, 3.0);
        fd_check("softplus", {&x}, [](Tape& t, std::vector<VarId>& ids) {
            VarId s = t.sum(t.softplus(ids[0]));
            return t.val(s)[0];
        });
    }
    {
        const int64_t h = 3, w = 4, d = 3;
        Tensor grid = random_tensor({h, w, d}, rng);
        Tensor wq = random_tensor({d, d}, rng);
        Tensor wk = random_tensor({d, d}, rng);
        Tensor wv = random_tensor({d, d}, rng);
        Rng mask_rng(seed + 100);
        AxialMaskSet masks = random_disjoint_masks(h, w, mask_rng);
        fd_check("axial_additive_attention", {&grid, &wq, &wk, &wv}, [&masks](Tape& t, std::vector<VarId>& ids) {
            VarId y = t.axial_additive_attention(ids[0], ids[1], ids[2], ids[3], masks, 1);
            VarId s = t.sum(t.mul(y, y));
            return t.val(s)[0];
        });
    }
    {
        const int64_t h = 3, w = 3, d = 2;
        Tensor grid = random_tensor({h, w, d}, rng);
        Tensor wq = random_tensor({d, d}, rng);
        Tensor wk = random_tensor({d, d}, rng);
        Tensor wv = random_tensor({d, d}, rng);
        std::vector<MaskMatrix> rows(static_cast<size_t>(h), MaskMatrix::strict_causal(w));
        fd_check("grid_axis_attention", {&grid, &wq, &wk, &wv}, [&rows](Tape& t, std::vector<VarId>& ids) {
            VarId y = t.grid_axis_attention(ids[0], ids[1], ids[2], ids[3], rows, GridAxis::Row, 1);
            VarId s = t.sum(t.mul(y, y));
            return t.val(s)[0];
        });
    }

    CheckResult r;
    r.name = "tape op gradients vs central finite differences";
    r.pass = worst <= tol;
    r.detail = "max relative error " + fmt(worst) + " (" + worst_op + "), tolerance " + fmt(tol);
    return r;
}

CheckResult check_model_gradients(double tol) {
    // tiny full model: D=8, L=2, P=3, T=4
    GeneratorParams gp = GeneratorParams::defaults();
    gp.seed = 424242;
    gp.league_teams = 4;
    gp.squad_size = 2;  // 2 per team -> P = 4; trimmed below to 3
    gp.starters = 2;
    gp.subs_per_team = 0;
    gp.sub_minutes = {};
    MatchRecord match = generate_match(gp, 0);
    match.squad.pop_back();  // P = 3
    std::vector<EventRecord> kept;
    for (const auto& e : match.events) {
        bool refers_missing = false;
        if (e.player_id && !match.find_player(*e.player_id)) refers_missing = true;
        if (e.other_player_id && !match.find_player(*e.other_player_id)) refers_missing = true;
        if (!refers_missing) kept.push_back(e);
        if (kept.size() == 4) break;
    }
    match.events = kept;  // T = 4

    const std::vector<MatchRecord> ds = {match};
    const std::vector<AssembledMatch> assembled = assemble_dataset(ds);
    const AssembledMatch& am = assembled[0];

    const EventVocabulary vocab = EventVocabulary::defaults();
    const FeatureSchema schema = FeatureSchema::build(vocab);
    ModelConfig cfg = ModelConfig::defaults(
        {schema.d_player, schema.d_player_strength, schema.d_team, schema.d_team_strength, schema.d_game,
         schema.d_game_context});
    cfg.latent_dim = 8;
    cfg.layers = 2;
    cfg.ff_hidden = 8;
    cfg.init_seed = 7;
    Model model = Model::init(cfg);

    auto loss_value = [&]() {
        Tape tape(false);
        const ModelForward fwd = model.forward(tape, am.inputs);
        return match_loss(tape, fwd, cfg, am.targets).values.total;
    };

    // analytic gradients
    Tape tape(true);
    const ModelForward fwd = model.forward(tape, am.inputs);
    const LossResult loss = match_loss(tape, fwd, cfg, am.targets);
    tape.backward(loss.total);

    double worst = 0.0;
    std::string worst_param = "none";
    for (const auto& [name, id] : fwd.param_ids) {
        Tensor analytic =
            tape.has_grad(id) ? tape.grad(id) : Tensor(tape.val(id).shape());
        Tensor* param = model.param_by_name(name);
        for (int64_t i = 0; i < param->numel(); ++i) {
            const double keep = (*param)[i];
            const double step = 1e-5;
            (*param)[i] = keep + step;
            const double up = loss_value();
            (*param)[i] = keep - step;
            const double down = loss_value();
            (*param)[i] = keep;
            const double fd = (up - down) / (2.0 * step);
            const double rel = std::fabs(fd - analytic[i]) / std::max(1e-6, std::fabs(fd) + std::fabs(analytic[i]));
            if (rel > worst) {
                worst = rel;
                worst_param = name;
            }
        }
    }
    CheckResult r;
    r.name = "tiny-model end-to-end gradients (D=8, L=2, P=3, T=4)";
    r.pass = worst <= tol;
    r.detail = "max relative error " + fmt(worst) + " (" + worst_param + "), tolerance " + fmt(tol);
    return r;
}

VerifyReport run_verify() {
    VerifyReport report;
    report.checks.push_back(check_equivalence());
    report.checks.push_back(check_permutation_equivariance());
    report.checks.push_back(check_causality());
    report.checks.push_back(check_op_gradients());
    report.checks.push_back(check_model_gradients());
    return report;
}

}  // namespace axf
