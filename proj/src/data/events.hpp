#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/tensor.hpp"

namespace axf {

// The twelve modelled action targets. Event types for action occurrences
// carry the same names, so the ledger mapping is 1:1.
const std::vector<std::string>& action_names();
int64_t action_count();
int64_t action_index(const std::string& name);  // -1 if unknown

// Key-event taxonomy. Shipped as data: the default list has 35 types (the
// twelve actions, match-structure events, and other triggerable events) and
// can be replaced from JSON. Non-key types are recorded but never trigger
// inference nor occupy a time-step.
class EventVocabulary {
  public:
    struct Entry {
        std::string name;
        bool key = true;
    };

    static EventVocabulary defaults();
    static EventVocabulary from_json_file(const std::string& path);
    void save_json_file(const std::string& path) const;

    int64_t size() const { return static_cast<int64_t>(entries_.size()); }
    int64_t index_of(const std::string& name) const;  // -1 if unknown
    bool contains(const std::string& name) const { return index_of(name) >= 0; }
    bool is_key(const std::string& name) const;
    const std::vector<Entry>& entries() const { return entries_; }

    void add(std::string name, bool key);

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int64_t> index_;
};

struct EventRecord {
    std::string type;
    double clock = 0.0;  // seconds from kickoff
    int period = 1;
    double x = 0.5;  // normalized pitch location
    double y = 0.5;
    std::optional<int64_t> player_id;
    std::optional<int64_t> team_id;
    std::optional<int64_t> other_player_id;  // substitutions: player coming on
};

struct PlayerRef {
    int64_t id = 0;
    int64_t team_id = 0;
    std::string position;  // GK / DF / MF / FW
    bool starter = false;
};

struct MatchRecord {
    int64_t match_id = 0;
    int64_t competition_id = 0;
    int64_t kickoff_day = 0;  // days since epoch of the synthetic league
    int kickoff_hour = 15;
    int64_t home_team_id = 0;
    int64_t away_team_id = 0;
    std::vector<PlayerRef> squad;
    std::vector<EventRecord> events;

    // events ordered by (period, clock); >= 1 event; actors drawn from squad
    void validate(const EventVocabulary& vocab) const;
    const PlayerRef* find_player(int64_t id) const;
    std::pair<int64_t, int64_t> final_score() const;  // (home, away) incl. own goals
    int outcome() const;                              // 0 home win, 1 draw, 2 away win
};

// Running and final action counts per player and team, indexed by event.
// running[t] covers events[0..t] inclusive; team counts are the sum of the
// team's player counts for these player-attributed actions.
struct ActionLedger {
    int64_t players = 0;
    int64_t steps = 0;
    Tensor player_running;  // P x T x A
    Tensor team_running;    // 2 x T x A
    Tensor player_total;    // P x A
    Tensor team_total;      // 2 x A

    static ActionLedger build(const MatchRecord& match);
};

// positions used by the indicator features
const std::vector<std::string>& position_names();
int64_t position_index(const std::string& name);

// Line-delimited dataset container: a schema-version header line followed by
// one match per line.
void write_dataset(const std::string& path, const std::vector<MatchRecord>& matches);
std::vector<MatchRecord> read_dataset(const std::string& path);

std::string match_to_json(const MatchRecord& m);
MatchRecord match_from_json(const std::string& line);
std::string event_to_json(const EventRecord& e);
EventRecord event_from_json(const std::string& line);

}  // namespace axf
