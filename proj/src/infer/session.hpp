#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "data/features.hpp"
#include "infer/store.hpp"
#include "model/model.hpp"

namespace axf {

// Per-event output message for the downstream consumer.
struct ForecastMessage {
    int64_t match_id = 0;
    int64_t event_index = 0;  // 0 = pre-game, k = k-th key event
    std::string event_type;   // "pre_game" for the initial trigger
    std::string model_version;
    double latency_ms = 0.0;

    struct AgentActionForecast {
        std::string family;
        std::vector<double> params;
        double mean = 0.0;
        double running = 0.0;
        double expected_total = 0.0;
    };
    struct AgentForecast {
        int64_t id = 0;
        std::vector<AgentActionForecast> actions;  // parallel to the model's action heads
    };
    std::vector<AgentForecast> players;
    std::vector<AgentForecast> teams;
    double outcome_home = 0.0, outcome_draw = 0.0, outcome_away = 0.0;

    int64_t prediction_count() const;
    // probabilities in range and summing to 1, expected totals >= running
    void validate() const;
    std::string to_json() const;
    static ForecastMessage from_json(const std::string& line);
};

// One live match. Events are pushed strictly in order; each key event
// appends its features to the store, re-assembles the inputs from stored
// history and runs a full forward pass. The pre-game forecast message is
// produced at construction from the pre-game column alone.
class InferenceSession {
  public:
    // header: match metadata + squad (events ignored); strengths must cover
    // the squad and both teams
    InferenceSession(const Model& model, const MatchRecord& header, const StrengthStore& strengths,
                     FeatureStore* store = nullptr);

    const ForecastMessage& pregame_message() const { return pregame_; }
    // returns a message for key events, nullopt for recorded non-key types
    std::optional<ForecastMessage> on_event(const EventRecord& event);

    int64_t steps_seen() const { return builder_.key_steps(); }

  private:
    MatchInputs assemble_from_store(int64_t steps) const;
    ForecastMessage build_message(const ForecastOutput& out, int64_t event_index, const std::string& event_type,
                                  double latency_ms) const;

    const Model& model_;
    EventVocabulary vocab_;
    FeatureSchema schema_;
    MatchFeatureBuilder builder_;
    std::unique_ptr<FeatureStore> owned_store_;
    FeatureStore* store_;
    int64_t match_id_;
    ForecastMessage pregame_;
};

struct LatencyStats {
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double max_ms = 0.0;
    double mean_ms = 0.0;
    int64_t events = 0;
};

struct ReplayResult {
    std::vector<ForecastMessage> messages;  // pre-game first
    LatencyStats latency;
};

// Feeds every event of a recorded match through a fresh session.
ReplayResult replay_match(const Model& model, const MatchRecord& match, const StrengthStore& strengths);

void write_messages(const std::string& path, const std::vector<ForecastMessage>& messages);
std::string latency_to_json(const LatencyStats& stats);

}  // namespace axf
