#pragma once

// Paper-style rendering of stored analysis records into one Markdown report
// plus comma-separated plot data.

#include <span>
#include <string>
#include <utility>

#include "rankstab/stability.hpp"
#include "rankstab/workspace.hpp"

namespace rankstab {

/// Two decimals; values strictly inside (-1, 1) lose the leading zero (".80", "-.14").
std::string format_score(double x);
/// "3.17 ±.55"
std::string format_mean_sd(double mean, double sd);
/// Two decimals with the leading zero kept ("0.99", "-0.38"); never "-0.00".
std::string format_corr(double x);
/// "0.99 [0.87, 1.00]"
std::string format_ci(double point, std::pair<double, double> ci);
/// "1.00"
std::string format_p(double p);

/// "Readability", "Coherence", ... for a stored metric id.
std::string metric_title(const std::string& metric);
/// "et–hu"
std::string pair_title(const LanguagePair& pair);

/// One Markdown table row: metric, pair, tau point, tau [CI], rho [CI], "inv, p".
std::string stability_row(const StabilityResult& r);

/// Header `pair,metric,tau,ci_lo,ci_hi,inversions,p` plus one line per result.
std::string stability_csv(std::span<const StabilityResult> results);

struct Report {
    std::string markdown;
    std::string plot_csv;
};

/// Pure rendering of whatever artifacts the workspace holds; missing ones
/// become notices.
Report render_report(const Workspace& ws);

/// Renders and writes report.md and plot_data/stability.csv.
Report build_report(const Workspace& ws);

} // namespace rankstab
