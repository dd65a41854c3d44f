// Self-rendered SVG charts for sweep results: a mean-agreement panel over a
// std panel, one series per strategy, log2 cost axis. No plotting library,
// so identical input always yields identical bytes.
#pragma once

#include <string>
#include <vector>

#include "cfx/eval.hpp"

namespace cfx {

struct ChartOptions {
    std::string title;
    bool use_api_calls = false;  // x = mean API calls instead of query size
    int width = 840;
    int panel_height = 280;
};

// InputError on an empty table. Series are keyed by strategy (prefixed with
// the dataset when several appear); points sort by x within a series.
std::string render_agreement_chart(const std::vector<SweepAggregate>& aggregates,
                                   const ChartOptions& opt);

// Strict reader for the aggregate CSV schema written by aggregates_csv.
// InputError names the offending row.
std::vector<SweepAggregate> parse_aggregates_csv(const std::string& text);

}  // namespace cfx
