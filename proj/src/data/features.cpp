#include "data/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace axf {

using nlohmann::json;

namespace {

constexpr int64_t kCompetitionSlots = 4;
constexpr double kClockScale = 1.0 / 5400.0;
constexpr double kDaysCap = 30.0;

}  // namespace

FeatureSchema FeatureSchema::build(const EventVocabulary& vocab) {
    FeatureSchema s;
    auto push = [&s](Home home, int64_t& dim, const std::string& name) {
        s.defs.push_back({name, home, dim});
        ++dim;
    };

    for (const auto& p : position_names()) push(Home::Player, s.d_player, "player_pos_" + p);
    push(Home::Player, s.d_player, "player_team_home");
    push(Home::Player, s.d_player, "player_team_away");
    push(Home::Player, s.d_player, "player_on_pitch");
    for (const auto& a : action_names()) push(Home::Player, s.d_player, "player_running_" + a);

    for (const auto& a : action_names()) push(Home::PlayerStrength, s.d_player_strength, "player_mean5_" + a);
    for (const auto& a : action_names()) push(Home::PlayerStrength, s.d_player_strength, "player_max10_" + a);
    push(Home::PlayerStrength, s.d_player_strength, "player_days_since_last");
    push(Home::PlayerStrength, s.d_player_strength, "player_debutant");

    push(Home::Team, s.d_team, "team_is_home");
    push(Home::Team, s.d_team, "team_is_away");
    for (const auto& a : action_names()) push(Home::Team, s.d_team, "team_running_" + a);
    push(Home::Team, s.d_team, "team_players_on_pitch");

    for (const auto& a : action_names()) push(Home::TeamStrength, s.d_team_strength, "team_mean5_" + a);
    push(Home::TeamStrength, s.d_team_strength, "team_days_since_last");
    push(Home::TeamStrength, s.d_team_strength, "team_debutant");

    for (const auto& e : vocab.entries()) push(Home::Game, s.d_game, "event_" + e.name);
    push(Home::Game, s.d_game, "clock_norm");
    push(Home::Game, s.d_game, "period_1");
    push(Home::Game, s.d_game, "period_2");
    push(Home::Game, s.d_game, "loc_x");
    push(Home::Game, s.d_game, "loc_y");
    push(Home::Game, s.d_game, "score_home");
    push(Home::Game, s.d_game, "score_away");

    for (int64_t c = 0; c < kCompetitionSlots; ++c)
        push(Home::GameContext, s.d_game_context, "competition_" + std::to_string(c));
    push(Home::GameContext, s.d_game_context, "kickoff_hour_norm");
    push(Home::GameContext, s.d_game_context, "knockout");
    push(Home::GameContext, s.d_game_context, "season_stage");
    return s;
}

int64_t FeatureSchema::dim(Home home) const {
    switch (home) {
        case Home::Player: return d_player;
        case Home::PlayerStrength: return d_player_strength;
        case Home::Team: return d_team;
        case Home::TeamStrength: return d_team_strength;
        case Home::Game: return d_game;
        case Home::GameContext: return d_game_context;
    }
    return 0;
}

std::string FeatureSchema::to_markdown() const {
    static const char* home_names[] = {"player", "player_strength", "team", "team_strength", "game", "game_context"};
    std::ostringstream os;
    os << "# Feature schema v" << version << "\n\n";
    os << "Each raw attribute lives in exactly one input tensor.\n\n";
    os << "| feature | tensor | index |\n|---|---|---|\n";
    for (const auto& d : defs)
        os << "| " << d.name << " | " << home_names[static_cast<int>(d.home)] << " | " << d.index << " |\n";
    return os.str();
}

void StrengthStore::put_player(int64_t id, std::vector<double> features) { players_[id] = std::move(features); }
void StrengthStore::put_team(int64_t id, std::vector<double> features) { teams_[id] = std::move(features); }

const std::vector<double>* StrengthStore::player(int64_t id) const {
    auto it = players_.find(id);
    return it == players_.end() ? nullptr : &it->second;
}

const std::vector<double>* StrengthStore::team(int64_t id) const {
    auto it = teams_.find(id);
    return it == teams_.end() ? nullptr : &it->second;
}

void StrengthStore::save(const std::string& path) const {
    json jp = json::object(), jt = json::object();
    for (const auto& [id, v] : players_) jp[std::to_string(id)] = v;
    for (const auto& [id, v] : teams_) jt[std::to_string(id)] = v;
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write strength store: " + path);
    out << json{{"players", jp}, {"teams", jt}}.dump() << "\n";
}

StrengthStore StrengthStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open strength store: " + path);
    json j = json::parse(in);
    StrengthStore s;
    for (auto it = j.at("players").begin(); it != j.at("players").end(); ++it)
        s.put_player(std::stoll(it.key()), it.value().get<std::vector<double>>());
    for (auto it = j.at("teams").begin(); it != j.at("teams").end(); ++it)
        s.put_team(std::stoll(it.key()), it.value().get<std::vector<double>>());
    return s;
}

StrengthHistory::StrengthHistory(StrengthWindows windows, const FeatureSchema* schema) : windows_(windows) {
    const int64_t a = action_count();
    d_player_strength_ = schema ? schema->d_player_strength : 2 * a + 2;
    d_team_strength_ = schema ? schema->d_team_strength : a + 2;
}

std::vector<double> StrengthHistory::player_row(int64_t id, int64_t day) const {
    const int64_t a = action_count();
    std::vector<double> row(static_cast<size_t>(d_player_strength_), 0.0);
    auto it = players_.find(id);
    if (it == players_.end() || it->second.recent_counts.empty()) {
        row[static_cast<size_t>(2 * a + 1)] = 1.0;  // debutant
        return row;
    }
    const auto& hist = it->second.recent_counts;
    const int64_t n_mean = std::min<int64_t>(windows_.mean_window, static_cast<int64_t>(hist.size()));
    for (int64_t k = 0; k < n_mean; ++k) {
        const auto& counts = hist[hist.size() - 1 - static_cast<size_t>(k)];
        for (int64_t x = 0; x < a; ++x) row[static_cast<size_t>(x)] += counts[static_cast<size_t>(x)];
    }
    for (int64_t x = 0; x < a; ++x) row[static_cast<size_t>(x)] /= static_cast<double>(n_mean);
    const int64_t n_max = std::min<int64_t>(windows_.max_window, static_cast<int64_t>(hist.size()));
    for (int64_t k = 0; k < n_max; ++k) {
        const auto& counts = hist[hist.size() - 1 - static_cast<size_t>(k)];
        for (int64_t x = 0; x < a; ++x)
            row[static_cast<size_t>(a + x)] = std::max(row[static_cast<size_t>(a + x)], counts[static_cast<size_t>(x)]);
    }
    row[static_cast<size_t>(2 * a)] =
        std::min(kDaysCap, static_cast<double>(day - it->second.last_day)) / kDaysCap;
    return row;
}

std::vector<double> StrengthHistory::team_row(int64_t id, int64_t day) const {
    const int64_t a = action_count();
    std::vector<double> row(static_cast<size_t>(d_team_strength_), 0.0);
    auto it = teams_.find(id);
    if (it == teams_.end() || it->second.recent_counts.empty()) {
        row[static_cast<size_t>(a + 1)] = 1.0;  // debutant
        return row;
    }
    const auto& hist = it->second.recent_counts;
    const int64_t n_mean = std::min<int64_t>(windows_.mean_window, static_cast<int64_t>(hist.size()));
    for (int64_t k = 0; k < n_mean; ++k) {
        const auto& counts = hist[hist.size() - 1 - static_cast<size_t>(k)];
        for (int64_t x = 0; x < a; ++x) row[static_cast<size_t>(x)] += counts[static_cast<size_t>(x)];
    }
    for (int64_t x = 0; x < a; ++x) row[static_cast<size_t>(x)] /= static_cast<double>(n_mean);
    row[static_cast<size_t>(a)] = std::min(kDaysCap, static_cast<double>(day - it->second.last_day)) / kDaysCap;
    return row;
}

StrengthStore StrengthHistory::snapshot_for(const MatchRecord& match) const {
    StrengthStore store;
    for (const auto& p : match.squad) store.put_player(p.id, player_row(p.id, match.kickoff_day));
    store.put_team(match.home_team_id, team_row(match.home_team_id, match.kickoff_day));
    store.put_team(match.away_team_id, team_row(match.away_team_id, match.kickoff_day));
    return store;
}

void StrengthHistory::observe(const MatchRecord& match) {
    const ActionLedger ledger = ActionLedger::build(match);
    const int64_t a = action_count();
    for (size_t pi = 0; pi < match.squad.size(); ++pi) {
        EntityHistory& h = players_[match.squad[pi].id];
        std::vector<double> counts(static_cast<size_t>(a));
        for (int64_t x = 0; x < a; ++x) counts[static_cast<size_t>(x)] = ledger.player_total.at2(static_cast<int64_t>(pi), x);
        h.recent_counts.push_back(std::move(counts));
        if (h.recent_counts.size() > 32) h.recent_counts.erase(h.recent_counts.begin());
        h.last_day = match.kickoff_day;
    }
    for (int64_t row = 0; row < 2; ++row) {
        const int64_t id = row == 0 ? match.home_team_id : match.away_team_id;
        EntityHistory& h = teams_[id];
        std::vector<double> counts(static_cast<size_t>(a));
        for (int64_t x = 0; x < a; ++x) counts[static_cast<size_t>(x)] = ledger.team_total.at2(row, x);
        h.recent_counts.push_back(std::move(counts));
        if (h.recent_counts.size() > 32) h.recent_counts.erase(h.recent_counts.begin());
        h.last_day = match.kickoff_day;
    }
}

StrengthStore compute_strength_features(const std::vector<MatchRecord>& history, const MatchRecord& upcoming,
                                        StrengthWindows windows) {
    StrengthHistory hist(windows);
    for (const auto& m : history) {
        if (m.kickoff_day > upcoming.kickoff_day)
            throw ValidationError("history match " + std::to_string(m.match_id) + " is after the upcoming match");
        hist.observe(m);
    }
    return hist.snapshot_for(upcoming);
}

MatchFeatureBuilder::MatchFeatureBuilder(const MatchRecord& header, const EventVocabulary& vocab,
                                         const FeatureSchema& schema)
    : header_(header), vocab_(vocab), schema_(schema) {
    header_.events.clear();
    const int64_t p = players();
    if (p < 1) throw ValidationError("match " + std::to_string(header_.match_id) + " has an empty squad");
    for (int64_t pi = 0; pi < p; ++pi) {
        const PlayerRef& ref = header_.squad[static_cast<size_t>(pi)];
        if (position_index(ref.position) < 0) throw ValidationError("unknown position: " + ref.position);
        row_of_[ref.id] = pi;
    }
    on_pitch_.assign(static_cast<size_t>(p), 0);
    for (int64_t pi = 0; pi < p; ++pi) on_pitch_[static_cast<size_t>(pi)] = header_.squad[static_cast<size_t>(pi)].starter;
    player_counts_.assign(static_cast<size_t>(p * action_count()), 0.0);
    team_counts_.assign(static_cast<size_t>(2 * action_count()), 0.0);
}

std::vector<double> MatchFeatureBuilder::game_context() const {
    std::vector<double> ctx(static_cast<size_t>(schema_.d_game_context), 0.0);
    ctx[static_cast<size_t>(header_.competition_id % kCompetitionSlots)] = 1.0;
    ctx[static_cast<size_t>(kCompetitionSlots)] = static_cast<double>(header_.kickoff_hour) / 24.0;
    ctx[static_cast<size_t>(kCompetitionSlots + 1)] = header_.competition_id % 3 == 0 ? 1.0 : 0.0;
    ctx[static_cast<size_t>(kCompetitionSlots + 2)] = static_cast<double>(header_.kickoff_day % 365) / 365.0;
    return ctx;
}

double MatchFeatureBuilder::player_running(int64_t player_row, int64_t action) const {
    return player_counts_[static_cast<size_t>(player_row * action_count() + action)];
}

double MatchFeatureBuilder::team_running(int64_t team_row, int64_t action) const {
    return team_counts_[static_cast<size_t>(team_row * action_count() + action)];
}

std::optional<MatchFeatureBuilder::StepFeatures> MatchFeatureBuilder::push(const EventRecord& e) {
    const int64_t p = players();
    const int64_t a = action_count();
    if (!vocab_.contains(e.type))
        throw ValidationError("match " + std::to_string(header_.match_id) + ": unknown event type '" + e.type + "'");
    if (e.x < 0.0 || e.x > 1.0 || e.y < 0.0 || e.y > 1.0)
        throw ValidationError("match " + std::to_string(header_.match_id) + ": event location outside [0,1]^2");
    if (e.period < last_period_ || (e.period == last_period_ && events_seen_ > 0 && e.clock < last_clock_))
        throw ValidationError("match " + std::to_string(header_.match_id) + ": events out of order at index " +
                              std::to_string(events_seen_));
    auto row_checked = [this](int64_t id) {
        auto it = row_of_.find(id);
        if (it == row_of_.end())
            throw ValidationError("match " + std::to_string(header_.match_id) + ": event actor " + std::to_string(id) +
                                  " not in squad");
        return it->second;
    };

    ++events_seen_;
    last_clock_ = e.clock;
    last_period_ = e.period;

    // state updates
    const int64_t ai = action_index(e.type);
    if (ai >= 0 && e.player_id) {
        const int64_t row = row_checked(*e.player_id);
        player_counts_[static_cast<size_t>(row * a + ai)] += 1.0;
        const int64_t team_row = header_.squad[static_cast<size_t>(row)].team_id == header_.home_team_id ? 0 : 1;
        team_counts_[static_cast<size_t>(team_row * a + ai)] += 1.0;
    }
    if (e.type == "goal" && e.team_id) (*e.team_id == header_.home_team_id ? score_home_ : score_away_) += 1;
    if (e.type == "own_goal" && e.team_id) (*e.team_id == header_.home_team_id ? score_away_ : score_home_) += 1;
    if (e.type == "red_card" && e.player_id) on_pitch_[static_cast<size_t>(row_checked(*e.player_id))] = 0;
    if (e.type == "substitution") {
        if (e.player_id) on_pitch_[static_cast<size_t>(row_checked(*e.player_id))] = 0;
        if (e.other_player_id) on_pitch_[static_cast<size_t>(row_checked(*e.other_player_id))] = 1;
    }

    if (!vocab_.is_key(e.type)) return std::nullopt;
    ++key_steps_;

    StepFeatures out;
    out.game.assign(static_cast<size_t>(schema_.d_game), 0.0);
    out.players.assign(static_cast<size_t>(p * schema_.d_player), 0.0);
    out.teams.assign(static_cast<size_t>(2 * schema_.d_team), 0.0);

    double* g = out.game.data();
    g[vocab_.index_of(e.type)] = 1.0;
    const int64_t vs = vocab_.size();
    g[vs] = e.clock * kClockScale;
    g[vs + 1] = e.period == 1 ? 1.0 : 0.0;
    g[vs + 2] = e.period == 2 ? 1.0 : 0.0;
    g[vs + 3] = e.x;
    g[vs + 4] = e.y;
    g[vs + 5] = static_cast<double>(score_home_);
    g[vs + 6] = static_cast<double>(score_away_);

    for (int64_t pi = 0; pi < p; ++pi) {
        const PlayerRef& ref = header_.squad[static_cast<size_t>(pi)];
        double* f = out.players.data() + pi * schema_.d_player;
        f[position_index(ref.position)] = 1.0;
        f[4 + (ref.team_id == header_.home_team_id ? 0 : 1)] = 1.0;
        f[6] = on_pitch_[static_cast<size_t>(pi)] ? 1.0 : 0.0;
        for (int64_t x = 0; x < a; ++x) f[7 + x] = player_counts_[static_cast<size_t>(pi * a + x)];
    }
    for (int64_t row_i = 0; row_i < 2; ++row_i) {
        double* f = out.teams.data() + row_i * schema_.d_team;
        f[row_i] = 1.0;
        for (int64_t x = 0; x < a; ++x) f[2 + x] = team_counts_[static_cast<size_t>(row_i * a + x)];
        double live = 0.0;
        for (int64_t pi = 0; pi < p; ++pi) {
            const bool home_row = header_.squad[static_cast<size_t>(pi)].team_id == header_.home_team_id;
            if ((row_i == 0) == home_row && on_pitch_[static_cast<size_t>(pi)]) live += 1.0;
        }
        f[2 + a] = live / 11.0;
    }
    return out;
}

AssembledMatch assemble_inputs(const MatchRecord& match, const StrengthStore& strengths, const EventVocabulary& vocab,
                               const FeatureSchema& schema) {
    match.validate(vocab);
    const int64_t p = static_cast<int64_t>(match.squad.size());
    const int64_t a = action_count();

    std::vector<int64_t> key_steps;
    for (size_t i = 0; i < match.events.size(); ++i)
        if (vocab.is_key(match.events[i].type)) key_steps.push_back(static_cast<int64_t>(i));
    const int64_t t_steps = static_cast<int64_t>(key_steps.size());
    if (t_steps < 1) throw ValidationError("match " + std::to_string(match.match_id) + " has no key events");

    const ActionLedger ledger = ActionLedger::build(match);

    AssembledMatch out;
    out.step_event_index = key_steps;
    MatchInputs& in = out.inputs;
    in.player = Tensor({p, t_steps, schema.d_player});
    in.player_strength = Tensor({p, schema.d_player_strength});
    in.team = Tensor({2, t_steps, schema.d_team});
    in.team_strength = Tensor({2, schema.d_team_strength});
    in.game = Tensor({t_steps, schema.d_game});

    // strength rows
    for (int64_t pi = 0; pi < p; ++pi) {
        const auto* row = strengths.player(match.squad[static_cast<size_t>(pi)].id);
        if (!row)
            throw ValidationError("missing strength row for player " +
                                  std::to_string(match.squad[static_cast<size_t>(pi)].id));
        if (static_cast<int64_t>(row->size()) != schema.d_player_strength)
            throw DimensionError("player strength row has wrong length");
        for (int64_t x = 0; x < schema.d_player_strength; ++x) in.player_strength.at2(pi, x) = (*row)[static_cast<size_t>(x)];
    }
    for (int64_t row_i = 0; row_i < 2; ++row_i) {
        const int64_t id = row_i == 0 ? match.home_team_id : match.away_team_id;
        const auto* row = strengths.team(id);
        if (!row) throw ValidationError("missing strength row for team " + std::to_string(id));
        if (static_cast<int64_t>(row->size()) != schema.d_team_strength)
            throw DimensionError("team strength row has wrong length");
        for (int64_t x = 0; x < schema.d_team_strength; ++x) in.team_strength.at2(row_i, x) = (*row)[static_cast<size_t>(x)];
    }

    MatchFeatureBuilder builder(match, vocab, schema);
    in.game_context = Tensor({schema.d_game_context}, builder.game_context());
    int64_t t = 0;
    for (const EventRecord& e : match.events) {
        auto step = builder.push(e);
        if (!step) continue;
        std::copy(step->game.begin(), step->game.end(), in.game.data() + t * schema.d_game);
        for (int64_t pi = 0; pi < p; ++pi)
            std::copy(step->players.begin() + pi * schema.d_player, step->players.begin() + (pi + 1) * schema.d_player,
                      in.player.data() + (pi * t_steps + t) * schema.d_player);
        for (int64_t row_i = 0; row_i < 2; ++row_i)
            std::copy(step->teams.begin() + row_i * schema.d_team, step->teams.begin() + (row_i + 1) * schema.d_team,
                      in.team.data() + (row_i * t_steps + t) * schema.d_team);
        ++t;
    }

    // targets and running counts aligned with grid columns (pre-game first)
    out.targets.player = Tensor({p, t_steps + 1, a});
    out.targets.team = Tensor({2, t_steps + 1, a});
    out.targets.outcome = match.outcome();
    out.running.player = Tensor({p, t_steps + 1, a});
    out.running.team = Tensor({2, t_steps + 1, a});
    for (int64_t pi = 0; pi < p; ++pi)
        for (int64_t x = 0; x < a; ++x) out.targets.player.at3(pi, 0, x) = ledger.player_total.at2(pi, x);
    for (int64_t row_i = 0; row_i < 2; ++row_i)
        for (int64_t x = 0; x < a; ++x) out.targets.team.at3(row_i, 0, x) = ledger.team_total.at2(row_i, x);
    for (int64_t t = 0; t < t_steps; ++t) {
        const int64_t ei = key_steps[static_cast<size_t>(t)];
        for (int64_t pi = 0; pi < p; ++pi)
            for (int64_t x = 0; x < a; ++x) {
                const double run = ledger.player_running.at3(pi, ei, x);
                out.running.player.at3(pi, t + 1, x) = run;
                out.targets.player.at3(pi, t + 1, x) = ledger.player_total.at2(pi, x) - run;
            }
        for (int64_t row_i = 0; row_i < 2; ++row_i)
            for (int64_t x = 0; x < a; ++x) {
                const double run = ledger.team_running.at3(row_i, ei, x);
                out.running.team.at3(row_i, t + 1, x) = run;
                out.targets.team.at3(row_i, t + 1, x) = ledger.team_total.at2(row_i, x) - run;
            }
    }
    return out;
}

}  // namespace axf
