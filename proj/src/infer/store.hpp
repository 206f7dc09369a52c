#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace axf {

// Keyed feature store for live inference: (match, kind, step) -> flat vector.
// Append-only per match; a network-backed store can be slotted in behind the
// same get/put contract.
class FeatureStore {
  public:
    enum class Kind : int { GameContext = 0, PlayerStrength, TeamStrength, EventGame, EventPlayers, EventTeams };

    static constexpr int64_t kPregameStep = -1;

    void put(int64_t match_id, Kind kind, int64_t step, std::vector<double> values);
    const std::vector<double>* get(int64_t match_id, Kind kind, int64_t step) const;
    bool has(int64_t match_id, Kind kind, int64_t step) const { return get(match_id, kind, step) != nullptr; }
    // requires steps [0, upto) present for the kind; throws naming the gap
    void require_contiguous(int64_t match_id, Kind kind, int64_t upto) const;

    void save(const std::string& path) const;
    static FeatureStore load(const std::string& path);

  private:
    struct Key {
        int64_t match_id;
        int kind;
        int64_t step;
        bool operator<(const Key& o) const {
            if (match_id != o.match_id) return match_id < o.match_id;
            if (kind != o.kind) return kind < o.kind;
            return step < o.step;
        }
    };
    std::map<Key, std::vector<double>> data_;
};

}  // namespace axf
