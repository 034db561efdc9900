#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core.hpp"

namespace singsusp {

// Two-sided symbol sequence stored as one period of a periodic point plus a phase.
// a_i = period[(phase + i) mod P]. Shifting only moves the phase, so the
// storage is shared between all points of an orbit.
class SymbolSeq {
public:
    using Data = std::vector<std::uint8_t>;

    SymbolSeq() = default;
    SymbolSeq(std::shared_ptr<const Data> data, std::int64_t phase) : data_(std::move(data)), phase_(0)
    {
        if (!data_ || data_->empty()) throw UsageError("symbol sequence needs a nonempty period");
        phase_ = norm(phase);
    }

    static SymbolSeq from_string(const std::string &digits, std::int64_t phase = 0)
    {
        auto d = std::make_shared<Data>();
        d->reserve(digits.size());
        for (char c : digits) {
            if (c < '0' || c > '9') throw UsageError("symbol strings use digits 0-9");
            d->push_back(static_cast<std::uint8_t>(c - '0'));
        }
        return SymbolSeq(std::move(d), phase);
    }

    bool valid() const { return static_cast<bool>(data_); }
    std::size_t period() const { return data_->size(); }
    std::int64_t phase() const { return phase_; }
    const std::shared_ptr<const Data> &data() const { return data_; }

    std::uint8_t at(std::int64_t i) const { return (*data_)[static_cast<std::size_t>(norm(phase_ + i))]; }

    // sigma^k
    SymbolSeq shifted(std::int64_t k) const
    {
        SymbolSeq s;
        s.data_ = data_;
        s.phase_ = norm(phase_ + k);
        return s;
    }

    std::string window(std::int64_t from, std::int64_t to) const
    {
        std::string s;
        for (std::int64_t i = from; i <= to; ++i) s.push_back(static_cast<char>('0' + at(i)));
        return s;
    }

    std::string period_string() const
    {
        std::string s;
        s.reserve(data_->size());
        for (auto c : *data_) s.push_back(static_cast<char>('0' + c));
        return s;
    }

private:
    std::int64_t norm(std::int64_t i) const
    {
        const auto p = static_cast<std::int64_t>(data_->size());
        i %= p;
        return i < 0 ? i + p : i;
    }

    std::shared_ptr<const Data> data_;
    std::int64_t phase_ = 0;
};

// Smallest |i| with a_i != b_i, or -1 when the sequences are equal.
// Two periodic sequences with periods P, Q that agree on P+Q consecutive
// indices are equal, so the scan is finite.
inline std::int64_t first_disagreement(const SymbolSeq &a, const SymbolSeq &b)
{
    if (a.data() == b.data() && a.phase() == b.phase()) return -1;
    if (a.at(0) != b.at(0)) return 0;
    const auto lim = static_cast<std::int64_t>(a.period() + b.period());
    for (std::int64_t i = 1; i <= lim; ++i) {
        if (a.at(i) != b.at(i) || a.at(-i) != b.at(-i)) return i;
    }
    return -1;
}

inline double shift_distance(const SymbolSeq &a, const SymbolSeq &b)
{
    const auto k = first_disagreement(a, b);
    if (k < 0) return 0.0;
    return std::ldexp(1.0, -static_cast<int>(std::min<std::int64_t>(k, 1070)));
}

} // namespace singsusp
