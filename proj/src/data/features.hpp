#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/tensor.hpp"
#include "data/events.hpp"

namespace axf {

// The six-tensor input tuple. T counts key-event time-steps; the pre-game
// column is added by the model's grid assembly, not here.
struct MatchInputs {
    Tensor player;           // P x T x D_player
    Tensor player_strength;  // P x D_player_strength
    Tensor team;             // 2 x T x D_team
    Tensor team_strength;    // 2 x D_team_strength
    Tensor game;             // T x D_game
    Tensor game_context;     // D_game_context

    int64_t players() const { return player.dim(0); }
    int64_t steps() const { return player.dim(1); }
};

// Remaining-count targets aligned with grid columns: column 0 (pre-game)
// holds full-match totals, column t+1 the count over (t, T].
struct TargetBundle {
    Tensor player;  // P x (T+1) x A
    Tensor team;    // 2 x (T+1) x A
    int outcome;    // 0 home / 1 draw / 2 away, constant over steps
};

// Running totals aligned the same way (column 0 is all-zero).
struct RunningCounts {
    Tensor player;  // P x (T+1) x A
    Tensor team;    // 2 x (T+1) x A
};

// Where every raw feature lives; the audit checks each name appears in
// exactly one tensor. Versioned alongside the dataset schema.
struct FeatureSchema {
    enum class Home { Player, PlayerStrength, Team, TeamStrength, Game, GameContext };
    struct Def {
        std::string name;
        Home home;
        int64_t index;
    };

    int version = 1;
    std::vector<Def> defs;
    int64_t d_player = 0, d_player_strength = 0, d_team = 0, d_team_strength = 0, d_game = 0, d_game_context = 0;

    static FeatureSchema build(const EventVocabulary& vocab);
    int64_t dim(Home home) const;
    std::string to_markdown() const;  // documentation export
};

// windowed aggregates of past matches
struct StrengthWindows {
    int64_t mean_window = 5;
    int64_t max_window = 10;
};

// Keyed lookup (player id / team id -> feature vector) with file persistence.
class StrengthStore {
  public:
    void put_player(int64_t id, std::vector<double> features);
    void put_team(int64_t id, std::vector<double> features);
    const std::vector<double>* player(int64_t id) const;
    const std::vector<double>* team(int64_t id) const;

    void save(const std::string& path) const;
    static StrengthStore load(const std::string& path);

  private:
    std::unordered_map<int64_t, std::vector<double>> players_;
    std::unordered_map<int64_t, std::vector<double>> teams_;
};

// Rolling per-entity history; observe matches in kickoff order and snapshot
// strength features for the next match. Entities without history receive the
// documented default row (all-zero aggregates, debut flag set).
class StrengthHistory {
  public:
    explicit StrengthHistory(StrengthWindows windows = {}, const FeatureSchema* schema = nullptr);

    // strength rows for this match's squad/teams, from matches seen so far
    StrengthStore snapshot_for(const MatchRecord& match) const;
    // fold the match into the history (call after snapshot_for)
    void observe(const MatchRecord& match);

  private:
    struct EntityHistory {
        std::vector<std::vector<double>> recent_counts;  // newest last, one row of A counts per match
        int64_t last_day = -1;
    };
    std::vector<double> player_row(int64_t id, int64_t day) const;
    std::vector<double> team_row(int64_t id, int64_t day) const;

    StrengthWindows windows_;
    int64_t d_player_strength_;
    int64_t d_team_strength_;
    std::unordered_map<int64_t, EntityHistory> players_;
    std::unordered_map<int64_t, EntityHistory> teams_;
};

// Windowed strength tensors for one squad from an ordered match history;
// thin wrapper over StrengthHistory for direct use.
StrengthStore compute_strength_features(const std::vector<MatchRecord>& history, const MatchRecord& upcoming,
                                        StrengthWindows windows = {});

struct AssembledMatch {
    MatchInputs inputs;
    TargetBundle targets;
    RunningCounts running;
    std::vector<int64_t> step_event_index;  // grid column t+1 -> index into match.events
};

// Incremental per-event feature computation shared by batch assembly and the
// streaming engine, so a streamed prefix reproduces the batch features
// bit-for-bit. Construction takes the match header (squad, teams, kickoff
// metadata); events are pushed one at a time in order.
class MatchFeatureBuilder {
  public:
    MatchFeatureBuilder(const MatchRecord& header, const EventVocabulary& vocab, const FeatureSchema& schema);

    struct StepFeatures {
        std::vector<double> game;     // d_game
        std::vector<double> players;  // P x d_player, row-major
        std::vector<double> teams;    // 2 x d_team
    };

    // processes one event; returns features when the event is a key type
    std::optional<StepFeatures> push(const EventRecord& event);

    std::vector<double> game_context() const;
    int64_t players() const { return static_cast<int64_t>(header_.squad.size()); }
    int64_t key_steps() const { return key_steps_; }
    // current running count (after all pushed events)
    double player_running(int64_t player_row, int64_t action) const;
    double team_running(int64_t team_row, int64_t action) const;
    const MatchRecord& header() const { return header_; }

  private:
    MatchRecord header_;
    const EventVocabulary& vocab_;
    const FeatureSchema& schema_;
    std::unordered_map<int64_t, int64_t> row_of_;
    std::vector<uint8_t> on_pitch_;
    std::vector<double> player_counts_;  // P x A
    std::vector<double> team_counts_;    // 2 x A
    int64_t score_home_ = 0, score_away_ = 0;
    int64_t key_steps_ = 0;
    int64_t events_seen_ = 0;
    double last_clock_ = -1.0;
    int last_period_ = 1;
};

// Builds the six input tensors and remaining-count targets for one match.
// Only key events occupy time-steps. Throws when a squad member or team has
// no strength row, or an event type is unknown.
AssembledMatch assemble_inputs(const MatchRecord& match, const StrengthStore& strengths, const EventVocabulary& vocab,
                               const FeatureSchema& schema);

}  // namespace axf
