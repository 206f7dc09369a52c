#include "data/events.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace axf {

using nlohmann::json;

const std::vector<std::string>& action_names() {
    static const std::vector<std::string> names = {
        "goal",          "assist", "shot",  "shot_on_target", "corner",      "attempted_pass",
        "accurate_pass", "tackle", "foul",  "yellow_card",    "red_card",    "own_goal",
    };
    return names;
}

int64_t action_count() { return static_cast<int64_t>(action_names().size()); }

int64_t action_index(const std::string& name) {
    const auto& names = action_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int64_t>(i);
    return -1;
}

EventVocabulary EventVocabulary::defaults() {
    EventVocabulary v;
    for (const auto& a : action_names()) v.add(a, true);
    // match structure
    for (const char* name : {"kickoff", "half_time", "second_half_start", "full_time", "substitution"})
        v.add(name, true);
    // other key events in the trigger taxonomy
    for (const char* name : {"offside", "throw_in", "goal_kick", "free_kick", "penalty_awarded", "penalty_scored",
                             "penalty_missed", "save", "clearance", "interception", "cross", "dribble", "block",
                             "duel_won", "duel_lost", "keeper_claim", "injury_stoppage", "var_review"})
        v.add(name, true);
    return v;
}

void EventVocabulary::add(std::string name, bool key) {
    if (contains(name)) throw ValidationError("duplicate event type: " + name);
    index_[name] = static_cast<int64_t>(entries_.size());
    entries_.push_back({std::move(name), key});
}

int64_t EventVocabulary::index_of(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

bool EventVocabulary::is_key(const std::string& name) const {
    const int64_t i = index_of(name);
    if (i < 0) throw ValidationError("unknown event type: " + name);
    return entries_[static_cast<size_t>(i)].key;
}

EventVocabulary EventVocabulary::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open event vocabulary: " + path);
    json j = json::parse(in);
    EventVocabulary v;
    for (const auto& e : j.at("types")) v.add(e.at("name").get<std::string>(), e.value("key", true));
    return v;
}

void EventVocabulary::save_json_file(const std::string& path) const {
    json types = json::array();
    for (const auto& e : entries_) types.push_back({{"name", e.name}, {"key", e.key}});
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write event vocabulary: " + path);
    out << json{{"types", types}}.dump(2) << "\n";
}

const std::vector<std::string>& position_names() {
    static const std::vector<std::string> names = {"GK", "DF", "MF", "FW"};
    return names;
}

int64_t position_index(const std::string& name) {
    const auto& names = position_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int64_t>(i);
    return -1;
}

void MatchRecord::validate(const EventVocabulary& vocab) const {
    if (events.empty()) throw ValidationError("match " + std::to_string(match_id) + " has no events");
    for (size_t i = 0; i < events.size(); ++i) {
        const EventRecord& e = events[i];
        if (!vocab.contains(e.type))
            throw ValidationError("match " + std::to_string(match_id) + ": unknown event type '" + e.type + "'");
        if (e.x < 0.0 || e.x > 1.0 || e.y < 0.0 || e.y > 1.0)
            throw ValidationError("match " + std::to_string(match_id) + ": event location outside [0,1]^2");
        if (i > 0) {
            const EventRecord& prev = events[i - 1];
            if (e.period < prev.period ||
                (e.period == prev.period && e.clock < prev.clock))
                throw ValidationError("match " + std::to_string(match_id) + ": events out of order at index " +
                                      std::to_string(i));
        }
        if (e.player_id && !find_player(*e.player_id))
            throw ValidationError("match " + std::to_string(match_id) + ": event actor " +
                                  std::to_string(*e.player_id) + " not in squad");
    }
}

const PlayerRef* MatchRecord::find_player(int64_t id) const {
    for (const auto& p : squad)
        if (p.id == id) return &p;
    return nullptr;
}

std::pair<int64_t, int64_t> MatchRecord::final_score() const {
    int64_t home = 0, away = 0;
    for (const auto& e : events) {
        if (!e.team_id) continue;
        if (e.type == "goal") {
            (*e.team_id == home_team_id ? home : away) += 1;
        } else if (e.type == "own_goal") {
            (*e.team_id == home_team_id ? away : home) += 1;
        }
    }
    return {home, away};
}

int MatchRecord::outcome() const {
    const auto [home, away] = final_score();
    if (home > away) return 0;
    if (home == away) return 1;
    return 2;
}

ActionLedger ActionLedger::build(const MatchRecord& match) {
    const int64_t p = static_cast<int64_t>(match.squad.size());
    const int64_t t = static_cast<int64_t>(match.events.size());
    const int64_t a = action_count();
    ActionLedger led;
    led.players = p;
    led.steps = t;
    led.player_running = Tensor({p, t, a});
    led.team_running = Tensor({2, t, a});
    led.player_total = Tensor({p, a});
    led.team_total = Tensor({2, a});

    std::unordered_map<int64_t, int64_t> player_row;
    for (int64_t i = 0; i < p; ++i) player_row[match.squad[static_cast<size_t>(i)].id] = i;

    std::vector<double> counts(static_cast<size_t>(p * a), 0.0);
    for (int64_t step = 0; step < t; ++step) {
        const EventRecord& e = match.events[static_cast<size_t>(step)];
        const int64_t ai = action_index(e.type);
        if (ai >= 0 && e.player_id) counts[static_cast<size_t>(player_row.at(*e.player_id) * a + ai)] += 1.0;
        for (int64_t pi = 0; pi < p; ++pi)
            for (int64_t x = 0; x < a; ++x) {
                const double c = counts[static_cast<size_t>(pi * a + x)];
                led.player_running.at3(pi, step, x) = c;
                const int64_t team_row = match.squad[static_cast<size_t>(pi)].team_id == match.home_team_id ? 0 : 1;
                led.team_running.at3(team_row, step, x) += c;
            }
    }
    for (int64_t pi = 0; pi < p; ++pi)
        for (int64_t x = 0; x < a; ++x) {
            const double c = counts[static_cast<size_t>(pi * a + x)];
            led.player_total.at2(pi, x) = c;
            const int64_t team_row = match.squad[static_cast<size_t>(pi)].team_id == match.home_team_id ? 0 : 1;
            led.team_total.at2(team_row, x) += c;
        }
    return led;
}

namespace {

json event_to_json_obj(const EventRecord& e) {
    json j{{"type", e.type}, {"clock", e.clock}, {"period", e.period}, {"x", e.x}, {"y", e.y}};
    if (e.player_id) j["player"] = *e.player_id;
    if (e.team_id) j["team"] = *e.team_id;
    if (e.other_player_id) j["other_player"] = *e.other_player_id;
    return j;
}

EventRecord event_from_json_obj(const json& j) {
    EventRecord e;
    e.type = j.at("type").get<std::string>();
    e.clock = j.at("clock").get<double>();
    e.period = j.at("period").get<int>();
    e.x = j.value("x", 0.5);
    e.y = j.value("y", 0.5);
    if (j.contains("player")) e.player_id = j["player"].get<int64_t>();
    if (j.contains("team")) e.team_id = j["team"].get<int64_t>();
    if (j.contains("other_player")) e.other_player_id = j["other_player"].get<int64_t>();
    return e;
}

json match_to_json_obj(const MatchRecord& m) {
    json squad = json::array();
    for (const auto& p : m.squad)
        squad.push_back({{"id", p.id}, {"team", p.team_id}, {"position", p.position}, {"starter", p.starter}});
    json events = json::array();
    for (const auto& e : m.events) events.push_back(event_to_json_obj(e));
    return json{{"match_id", m.match_id},
                {"competition_id", m.competition_id},
                {"kickoff_day", m.kickoff_day},
                {"kickoff_hour", m.kickoff_hour},
                {"home_team", m.home_team_id},
                {"away_team", m.away_team_id},
                {"squad", squad},
                {"events", events}};
}

MatchRecord match_from_json_obj(const json& j) {
    MatchRecord m;
    m.match_id = j.at("match_id").get<int64_t>();
    m.competition_id = j.at("competition_id").get<int64_t>();
    m.kickoff_day = j.at("kickoff_day").get<int64_t>();
    m.kickoff_hour = j.at("kickoff_hour").get<int>();
    m.home_team_id = j.at("home_team").get<int64_t>();
    m.away_team_id = j.at("away_team").get<int64_t>();
    for (const auto& p : j.at("squad")) {
        PlayerRef ref;
        ref.id = p.at("id").get<int64_t>();
        ref.team_id = p.at("team").get<int64_t>();
        ref.position = p.at("position").get<std::string>();
        ref.starter = p.value("starter", false);
        m.squad.push_back(ref);
    }
    for (const auto& e : j.at("events")) m.events.push_back(event_from_json_obj(e));
    return m;
}

constexpr const char* kDatasetSchema = "axf.dataset";
constexpr int kDatasetVersion = 1;

}  // namespace

std::string match_to_json(const MatchRecord& m) { return match_to_json_obj(m).dump(); }

MatchRecord match_from_json(const std::string& line) {
    return match_from_json_obj(json::parse(line));
}

std::string event_to_json(const EventRecord& e) { return event_to_json_obj(e).dump(); }

EventRecord event_from_json(const std::string& line) { return event_from_json_obj(json::parse(line)); }

void write_dataset(const std::string& path, const std::vector<MatchRecord>& matches) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open dataset for writing: " + path);
    out << json{{"schema", kDatasetSchema}, {"version", kDatasetVersion}}.dump() << "\n";
    for (const auto& m : matches) out << match_to_json(m) << "\n";
}

std::vector<MatchRecord> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset: " + path);
    std::vector<MatchRecord> matches;
    std::string line;
    int64_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!header_seen) {
            json header;
            try {
                header = json::parse(line);
            } catch (const json::exception& e) {
                throw ValidationError("dataset header unreadable: " + std::string(e.what()));
            }
            if (header.value("schema", "") != kDatasetSchema)
                throw ValidationError("not an axf dataset: " + path);
            if (header.value("version", -1) != kDatasetVersion)
                throw ValidationError("dataset version " + std::to_string(header.value("version", -1)) +
                                      " unsupported (expected " + std::to_string(kDatasetVersion) + ")");
            header_seen = true;
            continue;
        }
        try {
            matches.push_back(match_from_json(line));
        } catch (const json::exception& e) {
            throw ValidationError("dataset record " + std::to_string(matches.size()) + " (line " +
                                  std::to_string(line_no) + ") corrupt: " + std::string(e.what()));
        }
    }
    return matches;
}

}  // namespace axf
