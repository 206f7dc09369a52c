#include "data/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "core/rng.hpp"

namespace axf {

using nlohmann::json;

GeneratorParams GeneratorParams::defaults() {
    GeneratorParams p;
    p.base_rates = {
        {"goal", 0.9},  {"assist", 0.0},         {"shot", 2.6},        {"shot_on_target", 1.2},
        {"corner", 1.5}, {"attempted_pass", 4.5}, {"accurate_pass", 3.4}, {"tackle", 2.2},
        {"foul", 1.7},  {"yellow_card", 0.6},    {"red_card", 0.0},    {"own_goal", 0.05},
    };
    p.score_coeffs = {
        {"shot", -0.08}, {"shot_on_target", -0.08}, {"corner", -0.05}, {"goal", -0.05},
        {"foul", 0.05},  {"yellow_card", 0.05},
    };
    return p;
}

void GeneratorParams::validate() const {
    if (league_teams < 2) throw ValidationError("need at least two teams");
    if (squad_size < 1 || starters < 1 || starters > squad_size)
        throw ValidationError("squad/starter sizes invalid");
    if (subs_per_team > squad_size - starters)
        throw ValidationError("not enough bench players for the substitution schedule");
    for (const auto& [action, rate] : base_rates) {
        if (action_index(action) < 0) throw ValidationError("unknown action in base_rates: " + action);
        if (rate < 0.0) throw ValidationError("negative rate for " + action);
    }
    if (assist_prob < 0.0 || assist_prob > 1.0) throw ValidationError("assist_prob outside [0,1]");
    if (red_card_hazard < 0.0) throw ValidationError("negative red-card hazard");
}

double GeneratorParams::player_skill(int64_t pid, int64_t action) const {
    Rng rng(Rng::mix(Rng::mix(seed, static_cast<uint64_t>(pid)), 0x51c9d9 + static_cast<uint64_t>(action)));
    return std::exp(player_skill_sigma * rng.normal());
}

double GeneratorParams::team_strength(int64_t team_id) const {
    Rng rng(Rng::mix(Rng::mix(seed, 0x7ea3), static_cast<uint64_t>(team_id)));
    return std::exp(team_strength_sigma * rng.normal());
}

std::string GeneratorParams::to_json() const {
    json j{{"seed", seed},
           {"league_teams", league_teams},
           {"squad_size", squad_size},
           {"starters", starters},
           {"subs_per_team", subs_per_team},
           {"sub_minutes", sub_minutes},
           {"competitions", competitions},
           {"base_rates", base_rates},
           {"player_skill_sigma", player_skill_sigma},
           {"team_strength_sigma", team_strength_sigma},
           {"score_coeffs", score_coeffs},
           {"red_card_hazard", red_card_hazard},
           {"assist_prob", assist_prob}};
    return j.dump(2);
}

GeneratorParams GeneratorParams::from_json(const std::string& text) {
    json j = json::parse(text);
    GeneratorParams p = defaults();
    p.seed = j.value("seed", p.seed);
    p.league_teams = j.value("league_teams", p.league_teams);
    p.squad_size = j.value("squad_size", p.squad_size);
    p.starters = j.value("starters", p.starters);
    p.subs_per_team = j.value("subs_per_team", p.subs_per_team);
    if (j.contains("sub_minutes")) p.sub_minutes = j["sub_minutes"].get<std::vector<int64_t>>();
    p.competitions = j.value("competitions", p.competitions);
    if (j.contains("base_rates")) p.base_rates = j["base_rates"].get<std::map<std::string, double>>();
    p.player_skill_sigma = j.value("player_skill_sigma", p.player_skill_sigma);
    p.team_strength_sigma = j.value("team_strength_sigma", p.team_strength_sigma);
    if (j.contains("score_coeffs")) p.score_coeffs = j["score_coeffs"].get<std::map<std::string, double>>();
    p.red_card_hazard = j.value("red_card_hazard", p.red_card_hazard);
    p.assist_prob = j.value("assist_prob", p.assist_prob);
    return p;
}

GeneratorParams GeneratorParams::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open generator params: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

namespace {

struct SimPlayer {
    int64_t id;
    int64_t team_id;
    int64_t row;  // squad index
    bool on_pitch;
    bool used;  // has entered the pitch at some point
};

std::string position_for_slot(int64_t slot) {
    if (slot == 0) return "GK";
    if (slot <= 3) return "DF";
    if (slot <= 5) return "MF";
    return "FW";
}

}  // namespace

MatchRecord generate_match(const GeneratorParams& params, int64_t match_index) {
    params.validate();
    Rng rng(Rng::mix(params.seed, static_cast<uint64_t>(match_index)));

    MatchRecord m;
    m.match_id = match_index;
    m.competition_id = match_index % std::max<int64_t>(1, params.competitions);
    m.kickoff_day = match_index;
    m.kickoff_hour = 12 + static_cast<int>(match_index % 9);
    m.home_team_id = 1 + (match_index % params.league_teams);
    m.away_team_id = 1 + ((match_index * 7 + 3) % params.league_teams);
    if (m.away_team_id == m.home_team_id) m.away_team_id = 1 + (m.away_team_id % params.league_teams);

    std::vector<SimPlayer> sim;
    for (int64_t team : {m.home_team_id, m.away_team_id}) {
        for (int64_t slot = 0; slot < params.squad_size; ++slot) {
            PlayerRef ref;
            ref.id = params.player_id(team, slot);
            ref.team_id = team;
            ref.position = position_for_slot(slot);
            ref.starter = slot < params.starters;
            m.squad.push_back(ref);
            sim.push_back({ref.id, team, static_cast<int64_t>(m.squad.size() - 1), ref.starter, ref.starter});
        }
    }

    const auto& actions = action_names();
    int64_t score_home = 0, score_away = 0;
    std::vector<int64_t> red_cards = {0, 0};  // per team row (0 = home)
    size_t next_sub = 0;

    auto emit = [&m](std::string type, int period, double at, std::optional<int64_t> player,
                     std::optional<int64_t> team, Rng* loc_rng, std::optional<int64_t> other = {}) {
        EventRecord e;
        e.type = std::move(type);
        e.period = period;
        e.clock = at;
        if (loc_rng) {
            e.x = loc_rng->uniform();
            e.y = loc_rng->uniform();
        }
        e.player_id = player;
        e.team_id = team;
        e.other_player_id = other;
        m.events.push_back(std::move(e));
    };

    emit("kickoff", 1, 0.0, {}, {}, nullptr);

    auto on_pitch_of = [&sim](int64_t team) {
        std::vector<SimPlayer*> out;
        for (auto& p : sim)
            if (p.team_id == team && p.on_pitch) out.push_back(&p);
        return out;
    };

    for (int64_t minute = 1; minute <= 90; ++minute) {
        const int period = minute <= 45 ? 1 : 2;
        const double base_clock = (minute - 1) * 60.0;
        if (minute == 46) emit("second_half_start", 2, 45.0 * 60.0, {}, {}, nullptr);
        struct Pending {
            std::string type;
            int64_t player;
            int64_t team;
            std::optional<int64_t> other;
        };
        std::vector<Pending> pending;

        for (int64_t team_row = 0; team_row < 2; ++team_row) {
            const int64_t team = team_row == 0 ? m.home_team_id : m.away_team_id;
            const int64_t opp_row = 1 - team_row;
            auto players = on_pitch_of(team);
            if (players.empty()) continue;
            const double team_mult = params.team_strength(team);
            const int64_t diff_raw = team_row == 0 ? score_home - score_away : score_away - score_home;
            const double diff = std::clamp(static_cast<double>(diff_raw), -2.0, 2.0);
            // a sent-off player thins the short-handed side and lifts the opponent
            const double rc_mult = 1.0 - 0.12 * static_cast<double>(red_cards[static_cast<size_t>(team_row)]) +
                                   0.05 * static_cast<double>(red_cards[static_cast<size_t>(opp_row)]);

            for (size_t ai = 0; ai < actions.size(); ++ai) {
                const std::string& action = actions[ai];
                if (action == "assist" || action == "red_card") continue;
                auto it = params.base_rates.find(action);
                if (it == params.base_rates.end() || it->second <= 0.0) continue;
                double coeff = 0.0;
                if (auto sc = params.score_coeffs.find(action); sc != params.score_coeffs.end()) coeff = sc->second;
                const double score_mult = std::exp(coeff * diff);
                for (SimPlayer* sp : players) {
                    const double skill = params.player_skill(sp->id, static_cast<int64_t>(ai));
                    const double lam = it->second / 90.0 * skill * team_mult * score_mult * rc_mult /
                                       static_cast<double>(players.size()) * static_cast<double>(params.starters);
                    const int64_t n = rng.poisson(lam);
                    for (int64_t k = 0; k < n; ++k) pending.push_back({action, sp->id, team, {}});
                }
            }
            // red card hazard
            if (params.red_card_hazard > 0.0 && rng.bernoulli(params.red_card_hazard / 90.0)) {
                SimPlayer* victim = players[rng.below(players.size())];
                pending.push_back({"red_card", victim->id, team, {}});
            }
        }

        // substitutions on schedule
        if (next_sub < params.sub_minutes.size() && params.sub_minutes[next_sub] == minute) {
            ++next_sub;
            for (int64_t team : {m.home_team_id, m.away_team_id}) {
                for (int64_t k = 0; k < params.subs_per_team; ++k) {
                    auto players = on_pitch_of(team);
                    SimPlayer* bench = nullptr;
                    for (auto& p : sim)
                        if (p.team_id == team && !p.used && !p.on_pitch) {
                            bench = &p;
                            break;
                        }
                    if (!bench || players.empty()) break;
                    SimPlayer* off = players[rng.below(players.size())];
                    pending.push_back({"substitution", off->id, team, bench->id});
                }
            }
        }

        // apply in a deterministic order with increasing clocks
        const double step = 60.0 / static_cast<double>(pending.size() + 1);
        for (size_t k = 0; k < pending.size(); ++k) {
            const Pending& ev = pending[k];
            const double at = base_clock + step * static_cast<double>(k + 1);
            const int64_t team_row = ev.team == m.home_team_id ? 0 : 1;
            if (ev.type == "red_card") {
                for (auto& p : sim)
                    if (p.id == ev.player) p.on_pitch = false;
                red_cards[static_cast<size_t>(team_row)] += 1;
                emit("red_card", period, at, ev.player, ev.team, &rng);
            } else if (ev.type == "substitution") {
                for (auto& p : sim) {
                    if (p.id == ev.player) p.on_pitch = false;
                    if (ev.other && p.id == *ev.other) {
                        p.on_pitch = true;
                        p.used = true;
                    }
                }
                emit("substitution", period, at, ev.player, ev.team, &rng, ev.other);
            } else if (ev.type == "goal") {
                // optional assist from a team-mate just before the goal
                auto mates = on_pitch_of(ev.team);
                if (params.assist_prob > 0.0 && mates.size() > 1 && rng.bernoulli(params.assist_prob)) {
                    SimPlayer* mate = nullptr;
                    do {
                        mate = mates[rng.below(mates.size())];
                    } while (mate->id == ev.player);
                    emit("assist", period, at, mate->id, ev.team, &rng);
                }
                (team_row == 0 ? score_home : score_away) += 1;
                emit("goal", period, at, ev.player, ev.team, &rng);
            } else if (ev.type == "own_goal") {
                (team_row == 0 ? score_away : score_home) += 1;
                emit("own_goal", period, at, ev.player, ev.team, &rng);
            } else {
                // skip events for players sent off earlier in the same minute
                bool live = false;
                for (auto& p : sim)
                    if (p.id == ev.player) live = p.on_pitch;
                if (!live) continue;
                emit(ev.type, period, at, ev.player, ev.team, &rng);
            }
        }

        if (minute == 45) emit("half_time", 1, 45.0 * 60.0, {}, {}, nullptr);
    }
    emit("full_time", 2, 90.0 * 60.0, {}, {}, nullptr);
    return m;
}

std::vector<MatchRecord> generate_dataset(const GeneratorParams& params, int64_t n_matches) {
    std::vector<MatchRecord> out;
    out.reserve(static_cast<size_t>(n_matches));
    for (int64_t i = 0; i < n_matches; ++i) out.push_back(generate_match(params, i));
    return out;
}

}  // namespace axf
