#pragma once

// Deliberately naive reference implementations. Nothing here calls into the
// library; tests compare the library against these.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

/// Pairs ordered strictly oppositely, by enumerating every pair.
inline int inversions(const std::vector<double>& x, const std::vector<double>& y) {
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const bool up_x = x[i] < x[j], down_x = x[i] > x[j];
            const bool up_y = y[i] < y[j], down_y = y[i] > y[j];
            if ((up_x && down_y) || (down_x && up_y)) ++n;
        }
    }
    return n;
}

/// Tau-b from concordant, discordant and tie counts.
inline double tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    long c = 0, d = 0, tx = 0, ty = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double a = x[i] - x[j], b = y[i] - y[j];
            if (a == 0 && b == 0) continue;
            if (a == 0) ++tx;
            else if (b == 0) ++ty;
            else if ((a > 0) == (b > 0)) ++c;
            else ++d;
        }
    }
    const double denom = std::sqrt(double(c + d + tx) * double(c + d + ty));
    return denom == 0 ? 0.0 : double(c - d) / denom;
}

inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double below = 0, equal = 0;
        for (double w : v) {
            if (w < v[i]) ++below;
            if (w == v[i]) ++equal;
        }
        r[i] = below + (equal + 1) / 2.0;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(y.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(average_ranks(x), average_ranks(y));
}

inline double ttr(const std::vector<std::string>& t) {
    return double(std::set<std::string>(t.begin(), t.end()).size()) / double(t.size());
}

/// Every window copied out and counted from scratch.
inline double mattr(const std::vector<std::string>& t, std::size_t w) {
    if (t.size() <= w) return ttr(t);
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t s = 0; s + w <= t.size(); ++s, ++n) {
        sum += ttr(std::vector<std::string>(t.begin() + long(s), t.begin() + long(s + w)));
    }
    return sum / double(n);
}

using Doc = std::vector<std::string>;

inline std::map<Doc, int> ngram_counts(const Doc& d, std::size_t n) {
    std::map<Doc, int> out;
    for (std::size_t i = 0; i + n <= d.size(); ++i) out[Doc(d.begin() + long(i), d.begin() + long(i + n))]++;
    return out;
}

/// Sentence BLEU-4 with uniform weights and smoothing method 4 (k = 5),
/// written from the published definition: clipped counts over the
/// reference maxima, closest reference length with ties to the shorter one.
inline double bleu4(const std::vector<Doc>& refs, const Doc& hyp) {
    const double hyp_len = double(hyp.size());
    double num[5] = {}, den[5] = {};
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto h = ngram_counts(hyp, n);
        std::map<Doc, int> cap;
        for (const auto& r : refs) {
            for (const auto& [g, c] : ngram_counts(r, n)) cap[g] = std::max(cap[g], c);
        }
        double total = 0, clipped = 0;
        for (const auto& [g, c] : h) {
            total += c;
            auto it = cap.find(g);
            clipped += std::min(c, it == cap.end() ? 0 : it->second);
        }
        num[n] = clipped;
        den[n] = std::max(1.0, total);
    }
    if (num[1] == 0) return 0.0;

    double best = -1, best_gap = 1e300;
    for (const auto& r : refs) {
        const double gap = std::abs(double(r.size()) - hyp_len);
        if (gap < best_gap || (gap == best_gap && double(r.size()) < best)) {
            best_gap = gap;
            best = double(r.size());
        }
    }
    const double bp = hyp_len > best ? 1.0 : (hyp_len == 0 ? 0.0 : std::exp(1.0 - best / hyp_len));

    double p[5];
    int step = 1;
    for (int n = 1; n <= 4; ++n) {
        p[n] = num[n] / den[n];
        if (num[n] == 0 && hyp_len > 1) {
            p[n] = 1.0 / (std::pow(2.0, step) * 5.0 / std::log(hyp_len)) / den[n];
            ++step;
        }
    }
    double s = 0;
    for (int n = 1; n <= 4; ++n) {
        if (p[n] > 0) s += 0.25 * std::log(p[n]);
    }
    return bp * std::exp(s);
}

inline double self_bleu(const std::vector<Doc>& docs) {
    double sum = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        std::vector<Doc> refs;
        for (std::size_t j = 0; j < docs.size(); ++j) {
            if (j != i) refs.push_back(docs[j]);
        }
        sum += bleu4(refs, docs[i]);
    }
    return sum / double(docs.size());
}

/// Fleiss' kappa straight from the textbook sums.
inline double fleiss(const std::vector<std::vector<int>>& t, int raters) {
    const double N = double(t.size()), n = raters;
    const std::size_t k = t.front().size();
    double pbar = 0;
    std::vector<double> pj(k, 0.0);
    for (const auto& row : t) {
        double sq = 0;
        for (std::size_t j = 0; j < k; ++j) {
            sq += double(row[j]) * row[j];
            pj[j] += row[j];
        }
        pbar += (sq - n) / (n * (n - 1));
    }
    pbar /= N;
    double pe = 0;
    for (double v : pj) pe += (v / (N * n)) * (v / (N * n));
    return (pbar - pe) / (1 - pe);
}

/// Linear-interpolation percentile on a copy.
inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

/// p-value of the per-model swap test by listing every assignment.
inline double swap_test_p(const std::vector<double>& a, const std::vector<double>& b) {
    const int obs = inversions(a, b);
    const std::size_t n = a.size();
    int hits = 0;
    for (unsigned long m = 0; m < (1ul << n); ++m) {
        std::vector<double> x(a), y(b);
        for (std::size_t i = 0; i < n; ++i) {
            if (m >> i & 1) std::swap(x[i], y[i]);
        }
        if (inversions(x, y) >= obs) ++hits;
    }
    return double(hits) / double(1ul << n);
}

} // namespace oracle
