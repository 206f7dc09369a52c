#include "train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "core/rng.hpp"
#include "train/optim.hpp"

namespace axf {

using nlohmann::json;

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ValidationError("learning rate must be positive");
    if (batch_size < 1 || total_steps < 1) throw ValidationError("batch size and steps must be positive");
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
        throw ValidationError("validation fraction must be in (0,1)");
    if (eval_interval < 1) throw ValidationError("eval interval must be positive");
}

std::string TrainConfig::to_json() const {
    return json{{"lr", lr},
                {"lr_min", lr_min},
                {"batch_size", batch_size},
                {"total_steps", total_steps},
                {"anneal_horizon", anneal_horizon},
                {"validation_fraction", validation_fraction},
                {"seed", seed},
                {"loss_weights", loss_weights},
                {"clip_norm", clip_norm},
                {"eval_interval", eval_interval},
                {"eval_matches", eval_matches}}
        .dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.total_steps = j.value("total_steps", c.total_steps);
    c.anneal_horizon = j.value("anneal_horizon", c.anneal_horizon);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss_weights")) c.loss_weights = j["loss_weights"].get<std::map<std::string, double>>();
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    c.eval_matches = j.value("eval_matches", c.eval_matches);
    return c;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open train config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

std::vector<AssembledMatch> assemble_dataset(const std::vector<MatchRecord>& dataset) {
    const EventVocabulary vocab = EventVocabulary::defaults();
    const FeatureSchema schema = FeatureSchema::build(vocab);

    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&dataset](size_t a, size_t b) {
        if (dataset[a].kickoff_day != dataset[b].kickoff_day) return dataset[a].kickoff_day < dataset[b].kickoff_day;
        return dataset[a].match_id < dataset[b].match_id;
    });

    std::vector<AssembledMatch> out(dataset.size());
    StrengthHistory history({}, &schema);
    for (size_t idx : order) {
        const StrengthStore store = history.snapshot_for(dataset[idx]);
        out[idx] = assemble_inputs(dataset[idx], store, vocab, schema);
        history.observe(dataset[idx]);
    }
    return out;
}

bool is_validation_match(int64_t match_id, double validation_fraction) {
    const uint64_t h = Rng::mix(static_cast<uint64_t>(match_id), 0xA11CEULL);
    return static_cast<double>(h % 1000000ULL) < validation_fraction * 1000000.0;
}

PaddedBatch PaddedBatch::build(const std::vector<const AssembledMatch*>& matches) {
    if (matches.empty()) throw ValidationError("empty batch");
    PaddedBatch b;
    for (const auto* m : matches) {
        b.p_max = std::max(b.p_max, m->inputs.players());
        b.t_max = std::max(b.t_max, m->inputs.steps());
    }
    const int64_t a = action_count();
    for (const auto* m : matches) {
        const int64_t p = m->inputs.players(), t = m->inputs.steps();
        MatchInputs in;
        in.player = Tensor({b.p_max, b.t_max, m->inputs.player.dim(2)});
        in.player_strength = Tensor({b.p_max, m->inputs.player_strength.dim(1)});
        in.team = Tensor({2, b.t_max, m->inputs.team.dim(2)});
        in.team_strength = m->inputs.team_strength;
        in.game = Tensor({b.t_max, m->inputs.game.dim(1)});
        in.game_context = m->inputs.game_context;
        for (int64_t pi = 0; pi < p; ++pi) {
            std::memcpy(in.player.data() + pi * b.t_max * in.player.dim(2),
                        m->inputs.player.data() + pi * t * in.player.dim(2),
                        sizeof(double) * static_cast<size_t>(t * in.player.dim(2)));
            std::memcpy(in.player_strength.data() + pi * in.player_strength.dim(1),
                        m->inputs.player_strength.data() + pi * in.player_strength.dim(1),
                        sizeof(double) * static_cast<size_t>(in.player_strength.dim(1)));
        }
        for (int64_t row = 0; row < 2; ++row)
            std::memcpy(in.team.data() + row * b.t_max * in.team.dim(2),
                        m->inputs.team.data() + row * t * in.team.dim(2),
                        sizeof(double) * static_cast<size_t>(t * in.team.dim(2)));
        std::memcpy(in.game.data(), m->inputs.game.data(),
                    sizeof(double) * static_cast<size_t>(t * in.game.dim(1)));

        TargetBundle tg;
        tg.outcome = m->targets.outcome;
        tg.player = Tensor({b.p_max, b.t_max + 1, a});
        tg.team = Tensor({2, b.t_max + 1, a});
        for (int64_t pi = 0; pi < p; ++pi)
            for (int64_t col = 0; col < t + 1; ++col)
                std::memcpy(tg.player.data() + (pi * (b.t_max + 1) + col) * a,
                            m->targets.player.data() + (pi * (t + 1) + col) * a,
                            sizeof(double) * static_cast<size_t>(a));
        for (int64_t row = 0; row < 2; ++row)
            for (int64_t col = 0; col < t + 1; ++col)
                std::memcpy(tg.team.data() + (row * (b.t_max + 1) + col) * a,
                            m->targets.team.data() + (row * (t + 1) + col) * a,
                            sizeof(double) * static_cast<size_t>(a));

        MatchValidity v;
        v.players.assign(static_cast<size_t>(b.p_max), 0);
        for (int64_t pi = 0; pi < p; ++pi) v.players[static_cast<size_t>(pi)] = 1;
        v.steps.assign(static_cast<size_t>(b.t_max), 0);
        for (int64_t st = 0; st < t; ++st) v.steps[static_cast<size_t>(st)] = 1;

        b.inputs.push_back(std::move(in));
        b.targets.push_back(std::move(tg));
        b.validity.push_back(std::move(v));
    }
    return b;
}

namespace {

double validation_loss(const Model& model, const std::vector<AssembledMatch>& assembled,
                       const std::vector<int64_t>& val_ids, int64_t cap,
                       const std::map<std::string, double>* weights) {
    double total = 0.0;
    int64_t n = 0;
    for (int64_t idx : val_ids) {
        if (n >= cap) break;
        Tape tape(false);
        const ModelForward fwd = model.forward(tape, assembled[static_cast<size_t>(idx)].inputs);
        const LossResult loss =
            match_loss(tape, fwd, model.config, assembled[static_cast<size_t>(idx)].targets, nullptr, weights);
        total += loss.values.total;
        ++n;
    }
    return n > 0 ? total / static_cast<double>(n) : 0.0;
}

}  // namespace

TrainResult train(const std::vector<MatchRecord>& dataset, const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
    train_cfg.validate();
    if (dataset.empty()) throw ValidationError("training dataset is empty");

    const std::vector<AssembledMatch> assembled = assemble_dataset(dataset);

    TrainResult res;
    for (size_t i = 0; i < dataset.size(); ++i) {
        if (is_validation_match(dataset[i].match_id, train_cfg.validation_fraction))
            res.val_ids.push_back(static_cast<int64_t>(i));
        else
            res.train_ids.push_back(static_cast<int64_t>(i));
    }
    if (res.train_ids.empty()) throw ValidationError("validation split consumed every match");

    Model model = Model::init(model_cfg);
    Model best = model;
    Adam adam;
    Rng shuffle_rng(Rng::mix(train_cfg.seed, 0x5EEDULL));
    const int64_t horizon = train_cfg.anneal_horizon > 0 ? train_cfg.anneal_horizon : train_cfg.total_steps;
    const auto* weights = train_cfg.loss_weights.empty() ? nullptr : &train_cfg.loss_weights;

    std::vector<int64_t> epoch = res.train_ids;
    size_t cursor = epoch.size();  // trigger shuffle at first use
    res.best_val_loss = std::numeric_limits<double>::infinity();

    for (int64_t step = 1; step <= train_cfg.total_steps; ++step) {
        const int64_t batch_n = std::min<int64_t>(train_cfg.batch_size, static_cast<int64_t>(res.train_ids.size()));
        std::vector<const AssembledMatch*> batch_matches;
        for (int64_t k = 0; k < batch_n; ++k) {
            if (cursor >= epoch.size()) {
                shuffle_rng.shuffle(epoch);
                cursor = 0;
            }
            batch_matches.push_back(&assembled[static_cast<size_t>(epoch[cursor++])]);
        }
        const PaddedBatch batch = PaddedBatch::build(batch_matches);

        Tape tape(true);
        const BoundParams bound = model.bind(tape);
        std::vector<VarId> losses;
        LossBreakdown last_breakdown;
        for (size_t bi = 0; bi < batch.inputs.size(); ++bi) {
            const ModelForward fwd = model.forward(tape, batch.inputs[bi], &batch.validity[bi], false, &bound);
            LossResult lr = match_loss(tape, fwd, model.config, batch.targets[bi], &batch.validity[bi], weights);
            losses.push_back(lr.total);
            if (bi + 1 == batch.inputs.size()) last_breakdown = std::move(lr.values);
        }
        const VarId total = tape.scale(tape.add_n(losses), 1.0 / static_cast<double>(batch_n));
        const double train_loss = tape.val(total)[0];
        if (!std::isfinite(train_loss))
            throw ValidationError("training diverged at step " + std::to_string(step) +
                                  ": loss=" + std::to_string(train_loss));
        if (step == 1) res.first_train_loss = train_loss;
        res.last_train_loss = train_loss;

        tape.backward(total);

        std::vector<Tensor> grads;
        grads.reserve(bound.ids.size());
        for (const auto& [name, id] : bound.ids)
            grads.push_back(tape.has_grad(id) ? tape.grad(id) : Tensor(tape.val(id).shape()));
        std::vector<Tensor*> grad_ptrs;
        for (auto& g : grads) grad_ptrs.push_back(&g);
        clip_global_norm(grad_ptrs, train_cfg.clip_norm);

        const double lr_now = cosine_lr(std::min(step, horizon), horizon, train_cfg.lr, train_cfg.lr_min);
        adam.begin_step();
        for (size_t gi = 0; gi < bound.ids.size(); ++gi) {
            Tensor* param = model.param_by_name(bound.ids[gi].first);
            adam.update(bound.ids[gi].first, *param, grads[gi], lr_now);
        }

        if (step % train_cfg.eval_interval == 0 || step == train_cfg.total_steps) {
            const double val =
                validation_loss(model, assembled, res.val_ids, train_cfg.eval_matches, weights);
            TrainMetricsRow row;
            row.step = step;
            row.lr = lr_now;
            row.train_loss = train_loss;
            row.val_loss = val;
            row.per_target = last_breakdown.per_target;
            res.history.push_back(std::move(row));
            if (!res.val_ids.empty() && val < res.best_val_loss) {
                res.best_val_loss = val;
                res.best_step = step;
                best = model;
            }
        }
    }

    res.model = res.val_ids.empty() || res.best_step < 0 ? model : best;
    return res;
}

void write_metrics_csv(const std::string& path, const std::vector<TrainMetricsRow>& history) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write metrics csv: " + path);
    out << "step,lr,train_loss,val_loss";
    if (!history.empty())
        for (const auto& [name, value] : history.front().per_target) out << "," << name;
    out << "\n";
    out.precision(10);
    for (const auto& row : history) {
        out << row.step << "," << row.lr << "," << row.train_loss << "," << row.val_loss;
        for (const auto& [name, value] : row.per_target) out << "," << value;
        out << "\n";
    }
}

BaselineComparison compare_with_constant_rate_baseline(const Model& model, const std::vector<MatchRecord>& dataset,
                                                       double validation_fraction) {
    const std::vector<AssembledMatch> assembled = assemble_dataset(dataset);
    const int64_t a = action_count();

    // fit per-action mean remaining counts on the train split (player and
    // team predictions pooled, pre-game column included)
    std::vector<double> sum(static_cast<size_t>(a), 0.0);
    std::vector<int64_t> count(static_cast<size_t>(a), 0);
    std::vector<int64_t> val_ids;
    for (size_t i = 0; i < dataset.size(); ++i) {
        if (is_validation_match(dataset[i].match_id, validation_fraction)) {
            val_ids.push_back(static_cast<int64_t>(i));
            continue;
        }
        const TargetBundle& tg = assembled[i].targets;
        for (int64_t pi = 0; pi < tg.player.dim(0); ++pi)
            for (int64_t col = 0; col < tg.player.dim(1); ++col)
                for (int64_t ai = 0; ai < a; ++ai) {
                    sum[static_cast<size_t>(ai)] += tg.player.at3(pi, col, ai);
                    ++count[static_cast<size_t>(ai)];
                }
        for (int64_t row = 0; row < 2; ++row)
            for (int64_t col = 0; col < tg.team.dim(1); ++col)
                for (int64_t ai = 0; ai < a; ++ai) {
                    sum[static_cast<size_t>(ai)] += tg.team.at3(row, col, ai);
                    ++count[static_cast<size_t>(ai)];
                }
    }

    BaselineComparison cmp;
    cmp.actions = action_names();
    cmp.baseline_nll.assign(static_cast<size_t>(a), 0.0);
    cmp.model_nll.assign(static_cast<size_t>(a), 0.0);
    std::vector<double> rate(static_cast<size_t>(a));
    for (int64_t ai = 0; ai < a; ++ai)
        rate[static_cast<size_t>(ai)] =
            std::max(sum[static_cast<size_t>(ai)] / std::max<int64_t>(1, count[static_cast<size_t>(ai)]), 1e-6);

    auto poisson_nll = [](double lambda, double y) {
        return lambda - y * std::log(lambda) + std::lgamma(y + 1.0);
    };

    std::vector<int64_t> n_preds(static_cast<size_t>(a), 0);
    for (int64_t idx : val_ids) {
        const AssembledMatch& am = assembled[static_cast<size_t>(idx)];
        const ForecastOutput out = model.predict(am.inputs);
        const int64_t offset = out.has_pregame ? 0 : 1;
        const int64_t w = out.steps();
        for (int64_t ai = 0; ai < a; ++ai) {
            for (int64_t pi = 0; pi < am.targets.player.dim(0); ++pi)
                for (int64_t t = 0; t < w; ++t) {
                    const double y = am.targets.player.at3(pi, t + offset, ai);
                    cmp.baseline_nll[static_cast<size_t>(ai)] += poisson_nll(rate[static_cast<size_t>(ai)], y);
                    cmp.model_nll[static_cast<size_t>(ai)] +=
                        -out.player_dist(static_cast<size_t>(ai), pi, t).log_pmf(static_cast<int64_t>(y));
                    ++n_preds[static_cast<size_t>(ai)];
                }
            for (int64_t row = 0; row < 2; ++row)
                for (int64_t t = 0; t < w; ++t) {
                    const double y = am.targets.team.at3(row, t + offset, ai);
                    cmp.baseline_nll[static_cast<size_t>(ai)] += poisson_nll(rate[static_cast<size_t>(ai)], y);
                    cmp.model_nll[static_cast<size_t>(ai)] +=
                        -out.team_dist(static_cast<size_t>(ai), row, t).log_pmf(static_cast<int64_t>(y));
                    ++n_preds[static_cast<size_t>(ai)];
                }
        }
    }
    for (int64_t ai = 0; ai < a; ++ai) {
        const double n = static_cast<double>(std::max<int64_t>(1, n_preds[static_cast<size_t>(ai)]));
        cmp.baseline_nll[static_cast<size_t>(ai)] /= n;
        cmp.model_nll[static_cast<size_t>(ai)] /= n;
        if (cmp.model_nll[static_cast<size_t>(ai)] < cmp.baseline_nll[static_cast<size_t>(ai)]) ++cmp.wins;
    }
    return cmp;
}

}  // namespace axf
