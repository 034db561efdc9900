#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "core.hpp"
#include "symbol_seq.hpp"

namespace singsusp {

using Word = std::vector<std::uint8_t>;

enum class SubshiftKind { Constructed, Full, Constant };

struct SubshiftLevel {
    int block_len = 0;
    int prefix_blocks = 0; // reserved slots at the start of each block
    int free_slots = 0;
    std::vector<Word> blocks;
};

// Subshift generated by a hierarchical block schedule. The canonical point is
// the periodic sequence obtained by concatenating all top-level blocks; the
// subshift used by the rest of the library is its orbit closure.
struct Subshift {
    SubshiftKind kind = SubshiftKind::Constructed;
    int alphabet = 2;
    double target = 0.0;
    double tol = 0.0;
    int requested_levels = 0;
    std::uint64_t seed = 0;
    std::vector<SubshiftLevel> levels;
    std::shared_ptr<const SymbolSeq::Data> canonical;

    std::size_t period() const { return canonical ? canonical->size() : 0; }
    SymbolSeq point(std::int64_t phase = 0) const { return SymbolSeq(canonical, phase); }
    int l1() const { return levels.empty() ? 1 : levels[0].block_len; }
    int l2() const { return levels.size() < 2 ? l1() : levels[1].block_len; }
};

namespace detail {

constexpr std::uint64_t kMod61 = (1ULL << 61) - 1;

inline std::uint64_t mulmod61(std::uint64_t a, std::uint64_t b)
{
    unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    std::uint64_t lo = static_cast<std::uint64_t>(p & kMod61);
    std::uint64_t hi = static_cast<std::uint64_t>(p >> 61);
    std::uint64_t r = lo + hi;
    if (r >= kMod61) r -= kMod61;
    return r;
}

// Polynomial hashes of all windows of length n of a cyclic text, two bases.
struct WindowHashes {
    std::vector<std::uint64_t> h1, h2;
};

inline WindowHashes cyclic_window_hashes(const Word &text, std::size_t n)
{
    const std::size_t p = text.size();
    WindowHashes out;
    out.h1.resize(p);
    out.h2.resize(p);
    const std::uint64_t b1 = 1000003, b2 = 917120411;
    std::uint64_t pw1 = 1, pw2 = 1;
    for (std::size_t i = 0; i < n; ++i) {
        pw1 = mulmod61(pw1, b1);
        pw2 = mulmod61(pw2, b2);
    }
    std::uint64_t a1 = 0, a2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t c = text[i % p] + 1;
        a1 = (mulmod61(a1, b1) + c) % kMod61;
        a2 = (mulmod61(a2, b2) + c) % kMod61;
    }
    for (std::size_t i = 0; i < p; ++i) {
        out.h1[i] = a1;
        out.h2[i] = a2;
        const std::uint64_t cin = text[(i + n) % p] + 1;
        const std::uint64_t cout = text[i] + 1;
        a1 = (mulmod61(a1, b1) + cin + kMod61 - mulmod61(cout, pw1)) % kMod61;
        a2 = (mulmod61(a2, b2) + cin + kMod61 - mulmod61(cout, pw2)) % kMod61;
    }
    return out;
}

inline std::uint64_t word_hash(const Word &w, std::uint64_t base)
{
    std::uint64_t a = 0;
    for (auto c : w) a = (mulmod61(a, base) + c + 1) % kMod61;
    return a;
}

inline bool cyclic_equal(const Word &text, std::size_t pos, const Word &w)
{
    const std::size_t p = text.size();
    for (std::size_t i = 0; i < w.size(); ++i)
        if (text[(pos + i) % p] != w[i]) return false;
    return true;
}

inline int bits_for(int alphabet)
{
    int b = 1;
    while ((1 << b) < alphabet) ++b;
    return b;
}

// de Bruijn sequence of order 2 over k symbols, as a linear sequence of length k*k+1
inline std::vector<int> de_bruijn2(int k)
{
    if (k == 1) return {0, 0};
    std::vector<int> a(3 * k, 0), seq;
    std::function<void(int, int)> db = [&](int t, int p) {
        if (t > 2) {
            if (2 % p == 0)
                for (int j = 1; j <= p; ++j) seq.push_back(a[j]);
        } else {
            a[t] = a[t - p];
            db(t + 1, p);
            for (int j = a[t - p] + 1; j < k; ++j) {
                a[t] = j;
                db(t + 1, t);
            }
        }
    };
    db(1, 1);
    seq.push_back(seq.front());
    return seq;
}

} // namespace detail

// Number of distinct words of length n in the cyclic canonical point.
// Exact bit packing for short words, two independent 61-bit hashes otherwise.
inline std::size_t word_count(const Subshift &sh, std::size_t n)
{
    const Word &t = *sh.canonical;
    const std::size_t p = t.size();
    if (n == 0) return 1;
    const int b = detail::bits_for(sh.alphabet);
    if (n * static_cast<std::size_t>(b) <= 64) {
        std::vector<std::uint64_t> codes(p);
        const std::uint64_t mask = (n * b == 64) ? ~0ULL : ((1ULL << (n * b)) - 1);
        std::uint64_t c = 0;
        for (std::size_t i = 0; i < n; ++i) c = (c << b) | t[i % p];
        for (std::size_t i = 0; i < p; ++i) {
            codes[i] = c & mask;
            c = ((c << b) | t[(i + n) % p]) & mask;
        }
        std::sort(codes.begin(), codes.end());
        return static_cast<std::size_t>(std::unique(codes.begin(), codes.end()) - codes.begin());
    }
    auto h = detail::cyclic_window_hashes(t, n);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> v(p);
    for (std::size_t i = 0; i < p; ++i) v[i] = {h.h1[i], h.h2[i]};
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

// Exact membership of w in the language of the canonical point.
class LanguageIndex {
public:
    LanguageIndex(const Subshift &sh, std::size_t n) : text_(sh.canonical), n_(n)
    {
        auto h = detail::cyclic_window_hashes(*text_, n);
        for (std::size_t i = 0; i < h.h1.size(); ++i) pos_.emplace(h.h1[i], static_cast<std::uint32_t>(i));
    }
    bool contains(const Word &w) const
    {
        if (w.size() != n_) throw UsageError("word length does not match the language index");
        const std::uint64_t k = detail::word_hash(w, 1000003);
        auto range = pos_.equal_range(k);
        for (auto it = range.first; it != range.second; ++it)
            if (detail::cyclic_equal(*text_, it->second, w)) return true;
        return false;
    }
    std::size_t length() const { return n_; }

private:
    std::shared_ptr<const SymbolSeq::Data> text_;
    std::size_t n_;
    std::unordered_multimap<std::uint64_t, std::uint32_t> pos_;
};

// Block-increment entropy estimate (log p(L+L1) - log p(L)) / L1 at L = 2*L1.
inline double measured_entropy(const Subshift &sh)
{
    const std::size_t l = static_cast<std::size_t>(sh.l1());
    const double a = std::log(static_cast<double>(word_count(sh, 2 * l)));
    const double b = std::log(static_cast<double>(word_count(sh, 3 * l)));
    return (b - a) / static_cast<double>(l);
}

inline double naive_entropy(const Subshift &sh, std::size_t n)
{
    return std::log(static_cast<double>(word_count(sh, n))) / static_cast<double>(n);
}

inline Subshift full_shift_subshift(int k, std::size_t period = 1u << 16, std::uint64_t seed = 7)
{
    if (k < 2) throw UsageError("full shift needs k >= 2");
    Subshift sh;
    sh.kind = SubshiftKind::Full;
    sh.alphabet = k;
    sh.target = std::log(static_cast<double>(k));
    sh.seed = seed;
    Rng rng(seed);
    auto d = std::make_shared<Word>(period);
    for (auto &c : *d) c = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(k)));
    sh.canonical = d;
    return sh;
}

inline Subshift constant_subshift(std::uint8_t symbol = 0, int alphabet = 2)
{
    Subshift sh;
    sh.kind = SubshiftKind::Constant;
    sh.alphabet = alphabet;
    sh.canonical = std::make_shared<Word>(1, symbol);
    return sh;
}

inline double full_shift_entropy(int k)
{
    if (k < 2) throw UsageError("full shift entropy needs k >= 2");
    const Subshift sh = full_shift_subshift(k);
    double p = 1;
    for (std::size_t n = 1; n <= 6; ++n) {
        p *= k;
        if (p > static_cast<double>(sh.period()) / 16) break;
        if (static_cast<double>(word_count(sh, n)) != p)
            throw NumericalError("full shift word count cross-check failed at n=" + std::to_string(n));
    }
    return std::log(static_cast<double>(k));
}

struct EntropyBand {
    double lo, hi;
};

struct Level1Choice {
    int len = 0;
    int count = 0;
};

inline std::optional<Level1Choice> choose_level1(double c, double tol, int alphabet)
{
    for (int len = alphabet + 2; len <= 16; ++len) {
        const double cap = std::pow(static_cast<double>(alphabet), len - alphabet);
        long n = std::lround(std::exp(c * len));
        if (n < 2) n = 2;
        if (static_cast<double>(n) > cap) continue;
        if (std::fabs(std::log(static_cast<double>(n)) / len - c) < tol / 2) return Level1Choice{len, static_cast<int>(n)};
    }
    return std::nullopt;
}

inline EntropyBand achievable_band(double tol, int alphabet)
{
    double lo = kInf, hi = 0;
    for (int len = alphabet + 2; len <= 16; ++len) {
        const double cap = std::pow(static_cast<double>(alphabet), len - alphabet);
        const double top = std::log(cap) / len;
        hi = std::max(hi, top + tol / 2);
        lo = std::min(lo, std::log(2.0) / len - tol / 2);
    }
    return {std::max(0.0, lo), hi};
}

inline std::uint64_t subshift_seed(double c, int levels, double tol)
{
    std::uint64_t a, b;
    std::memcpy(&a, &c, sizeof a);
    std::memcpy(&b, &tol, sizeof b);
    return derive_seed(a ^ (b << 1), static_cast<std::uint64_t>(levels));
}

inline Subshift minimal_subshift_with_entropy(double c, int levels, double tol, int alphabet = 2)
{
    if (!(c > 0)) throw UsageError("target entropy must be positive");
    if (levels < 3) throw UsageError("at least 3 levels are required");
    if (!(tol > 0)) throw UsageError("tolerance must be positive");
    if (alphabet < 2 || alphabet > 10) throw UsageError("alphabet size must be in [2,10]");
    const double margin = 0.05;
    const auto band = achievable_band(tol, alphabet);
    auto l1 = choose_level1(c, tol, alphabet);
    if (c >= std::log(static_cast<double>(alphabet)) - margin || !l1)
        throw UsageError("target entropy " + std::to_string(c) + " is infeasible at tolerance " + std::to_string(tol) +
                         "; achievable band is about [" + std::to_string(band.lo) + ", " + std::to_string(band.hi) + "]");

    Subshift sh;
    sh.kind = SubshiftKind::Constructed;
    sh.alphabet = alphabet;
    sh.target = c;
    sh.tol = tol;
    sh.requested_levels = levels;
    sh.seed = subshift_seed(c, levels, tol);
    Rng rng(sh.seed);

    // level 1: reserved prefix 0,1,...,k-1 followed by a free word
    SubshiftLevel lv1;
    lv1.block_len = l1->len;
    lv1.prefix_blocks = alphabet;
    lv1.free_slots = l1->len - alphabet;
    {
        const int free_len = l1->len - alphabet;
        std::uint64_t space = 1;
        for (int i = 0; i < free_len; ++i) space *= static_cast<std::uint64_t>(alphabet);
        std::vector<std::uint64_t> idx;
        if (space <= (1u << 20)) {
            idx.resize(space);
            for (std::uint64_t i = 0; i < space; ++i) idx[i] = i;
            rng.shuffle(idx);
            idx.resize(static_cast<std::size_t>(l1->count));
        } else {
            std::unordered_set<std::uint64_t> seen;
            while (idx.size() < static_cast<std::size_t>(l1->count)) {
                const std::uint64_t v = rng.below(space);
                if (seen.insert(v).second) idx.push_back(v);
            }
        }
        std::sort(idx.begin(), idx.end());
        for (auto v : idx) {
            Word w;
            for (int s = 0; s < alphabet; ++s) w.push_back(static_cast<std::uint8_t>(s));
            Word tail(free_len);
            for (int i = free_len - 1; i >= 0; --i) {
                tail[i] = static_cast<std::uint8_t>(v % alphabet);
                v /= alphabet;
            }
            w.insert(w.end(), tail.begin(), tail.end());
            lv1.blocks.push_back(std::move(w));
        }
    }
    sh.levels.push_back(std::move(lv1));

    auto concat = [](const std::vector<Word> &from, const std::vector<int> &idx) {
        Word w;
        for (int i : idx) w.insert(w.end(), from[i].begin(), from[i].end());
        return w;
    };

    // level 2: prefix visits every ordered pair of level-1 blocks, then free slots
    {
        const auto &b1 = sh.levels[0].blocks;
        const int n1 = static_cast<int>(b1.size());
        const auto prefix = detail::de_bruijn2(n1);
        SubshiftLevel lv;
        lv.prefix_blocks = static_cast<int>(prefix.size());
        lv.free_slots = 4 * lv.prefix_blocks;
        const double need = 8.0 * n1 * n1 * n1 / lv.free_slots;
        const int n2 = std::max(4, static_cast<int>(std::ceil(need)));
        lv.block_len = (lv.prefix_blocks + lv.free_slots) * sh.levels[0].block_len;
        for (int j = 0; j < n2; ++j) {
            std::vector<int> idx(prefix);
            for (int s = 0; s < lv.free_slots; ++s) idx.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n1))));
            lv.blocks.push_back(concat(b1, idx));
        }
        sh.levels.push_back(std::move(lv));
    }

    // higher levels: prefix enumerates the previous level once, one free slot
    for (int l = 3; l <= levels; ++l) {
        const auto &prev = sh.levels.back().blocks;
        const int np = static_cast<int>(prev.size());
        SubshiftLevel lv;
        lv.prefix_blocks = np;
        lv.free_slots = 1;
        lv.block_len = (np + 1) * sh.levels.back().block_len;
        const int nl = 2;
        std::vector<int> frees;
        while (static_cast<int>(frees.size()) < nl) {
            int f = static_cast<int>(rng.below(static_cast<std::uint64_t>(np)));
            if (std::find(frees.begin(), frees.end(), f) == frees.end()) frees.push_back(f);
        }
        for (int j = 0; j < nl; ++j) {
            std::vector<int> idx;
            for (int i = 0; i < np; ++i) idx.push_back(i);
            idx.push_back(frees[j]);
            lv.blocks.push_back(concat(prev, idx));
        }
        sh.levels.push_back(std::move(lv));
    }

    auto canon = std::make_shared<Word>();
    for (const auto &b : sh.levels.back().blocks) canon->insert(canon->end(), b.begin(), b.end());
    sh.canonical = canon;
    return sh;
}

struct MinimalityCertificate {
    bool certified = false;
    std::size_t gap = 0; // largest distance between consecutive occurrences of an admissible word
    Word word;           // refuting word when not certified
    std::size_t window_position = 0;
    std::size_t words_checked = 0;
};

// Checks that each word_len-word of the language shows up inside every window of
// length `window` of the canonical point. scan_len limits the scanned prefix of
// the (cyclic) canonical point; 0 means one full period.
inline MinimalityCertificate minimality_certificate(const Subshift &sh, std::size_t word_len, std::size_t window,
                                                    std::size_t scan_len = 0)
{
    const Word &t = *sh.canonical;
    const std::size_t p = t.size();
    if (word_len == 0) throw UsageError("word length must be positive");
    if (sh.kind == SubshiftKind::Constructed && word_len > static_cast<std::size_t>(sh.levels.back().block_len))
        throw UsageError("word length exceeds the top block length");
    const std::size_t scan = scan_len == 0 ? p : std::min(scan_len, p);

    // admissible words come from the whole cyclic language
    std::vector<std::pair<std::uint64_t, std::uint64_t>> key(p);
    {
        auto h = detail::cyclic_window_hashes(t, word_len);
        for (std::size_t i = 0; i < p; ++i) key[i] = {h.h1[i], h.h2[i]};
    }
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::size_t> id;
    for (std::size_t i = 0; i < p; ++i) id.emplace(key[i], id.size());
    const std::size_t nw = id.size();
    std::vector<std::size_t> wid(p);
    for (std::size_t i = 0; i < p; ++i) wid[i] = id.at(key[i]);

    std::vector<long long> last(nw, -1), first(nw, -1);
    std::vector<std::size_t> maxgap(nw, 0), gap_at(nw, 0);
    const bool cyclic = scan == p;
    for (std::size_t i = 0; i < scan; ++i) {
        const std::size_t w = wid[i];
        const long long prev = last[w];
        const std::size_t g = prev < 0 ? i + 1 : i - static_cast<std::size_t>(prev);
        if (prev >= 0 || !cyclic) {
            if (g > maxgap[w]) {
                maxgap[w] = g;
                gap_at[w] = prev < 0 ? 0 : static_cast<std::size_t>(prev);
            }
        }
        if (first[w] < 0) first[w] = static_cast<long long>(i);
        last[w] = static_cast<long long>(i);
    }
    MinimalityCertificate cert;
    cert.words_checked = nw;
    std::size_t worst = 0, worst_w = 0;
    for (std::size_t w = 0; w < nw; ++w) {
        std::size_t g;
        if (last[w] < 0) {
            g = scan + 1; // never seen in the scanned part
        } else if (cyclic) {
            const std::size_t wrap = p - static_cast<std::size_t>(last[w]) + static_cast<std::size_t>(first[w]);
            g = std::max(maxgap[w], wrap);
            if (wrap >= maxgap[w]) gap_at[w] = static_cast<std::size_t>(last[w]);
        } else {
            const std::size_t tail = scan - static_cast<std::size_t>(last[w]);
            g = std::max(maxgap[w], tail);
            if (tail > maxgap[w]) gap_at[w] = static_cast<std::size_t>(last[w]);
        }
        if (g > worst) {
            worst = g;
            worst_w = w;
        }
    }
    cert.gap = worst;
    // a window of length `window` starting right after an occurrence misses the
    // word iff the next occurrence starts later than window - word_len positions on
    cert.certified = worst + word_len <= window + 1;
    if (!cert.certified) {
        for (std::size_t i = 0; i < p; ++i)
            if (wid[i] == worst_w) {
                cert.word.assign(word_len, 0);
                for (std::size_t j = 0; j < word_len; ++j) cert.word[j] = t[(i + j) % p];
                break;
            }
        cert.window_position = (gap_at[worst_w] + 1) % p;
    }
    return cert;
}

// True when no level-`level` block of `a` occurs in the language of `b` and vice versa.
inline bool blocks_disjoint(const Subshift &a, const Subshift &b, int level = 2)
{
    auto one_way = [level](const Subshift &x, const Subshift &y) {
        if (static_cast<int>(x.levels.size()) < level) return true;
        const auto &blocks = x.levels[level - 1].blocks;
        if (blocks.empty()) return true;
        LanguageIndex idx(y, blocks.front().size());
        for (const auto &w : blocks)
            if (idx.contains(w)) return false;
        return true;
    };
    return one_way(a, b) && one_way(b, a);
}

struct AvoidanceResult {
    Subshift subshift;
    std::size_t target_index = 0;
    double target = 0;
    std::vector<std::size_t> rejected; // indices of targets whose language met a forbidden window
};

// Iterates over targets and returns the first constructed subshift whose
// language contains none of the forbidden windows.
inline AvoidanceResult choose_subshift_avoiding(const std::vector<Word> &forbidden, const std::vector<double> &targets,
                                                int levels = 3, double tol = 0.02, int alphabet = 2)
{
    if (targets.empty()) throw UsageError("no entropy targets given");
    AvoidanceResult res;
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        Subshift sh = minimal_subshift_with_entropy(targets[ti], levels, tol, alphabet);
        bool ok = true;
        std::map<std::size_t, std::unique_ptr<LanguageIndex>> idx;
        for (const auto &w : forbidden) {
            if (w.empty()) continue;
            auto &ix = idx[w.size()];
            if (!ix) ix = std::make_unique<LanguageIndex>(sh, w.size());
            if (ix->contains(w)) {
                ok = false;
                break;
            }
        }
        if (ok) {
            res.subshift = std::move(sh);
            res.target_index = ti;
            res.target = targets[ti];
            return res;
        }
        res.rejected.push_back(ti);
    }
    throw DomainError("every entropy target met a forbidden window (" + std::to_string(targets.size()) + " targets tried)");
}

} // namespace singsusp
