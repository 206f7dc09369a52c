#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "data/events.hpp"

namespace axf {

// Synthetic league configuration. Per-player rates derive from the league
// base rate per action, a stable per-(player, action) skill multiplier and a
// stable per-team multiplier, so strength features computed from past
// matches carry real signal about future ones.
struct GeneratorParams {
    uint64_t seed = 1;
    int64_t league_teams = 8;
    int64_t squad_size = 8;   // per team, bench included
    int64_t starters = 7;
    int64_t subs_per_team = 1;
    std::vector<int64_t> sub_minutes = {62};
    int64_t competitions = 4;

    std::map<std::string, double> base_rates;  // expected per-team occurrences per match
    double player_skill_sigma = 0.5;
    double team_strength_sigma = 0.2;
    std::map<std::string, double> score_coeffs;  // rate *= exp(coeff * clamped score diff)
    double red_card_hazard = 0.06;               // per team per match
    double assist_prob = 0.75;

    static GeneratorParams defaults();
    void validate() const;
    std::string to_json() const;
    static GeneratorParams from_json(const std::string& text);
    static GeneratorParams from_json_file(const std::string& path);

    // stable multipliers (independent of the match stream)
    double player_skill(int64_t player_id, int64_t action) const;
    double team_strength(int64_t team_id) const;
    int64_t player_id(int64_t team_id, int64_t slot) const { return team_id * 1000 + slot; }
};

// One simulated match; byte-identical output for identical (params, index).
MatchRecord generate_match(const GeneratorParams& params, int64_t match_index);

std::vector<MatchRecord> generate_dataset(const GeneratorParams& params, int64_t n_matches);

}  // namespace axf
