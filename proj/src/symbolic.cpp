#include "hyperdyn/symbolic.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace hyperdyn {

namespace {

long pmod(long a, long m)
{
    long r = a % m;
    return r < 0 ? r + m : r;
}

void check_word(const Word& w, int k, const char* what)
{
    for (int c : w)
        if (c < 0 || c >= k)
            throw Error("BadInput", std::string(what) + " has a symbol outside the alphabet");
}

Word prefix(const Word& w) { return Word(w.begin(), w.end() - 1); }
Word suffix(const Word& w) { return Word(w.begin() + 1, w.end()); }

// Positions whose length-n windows cover every window of x.
std::pair<long, long> window_range(const Sequence& x, int n)
{
    long lo = x.start - n - static_cast<long>(x.left.size());
    long hi = x.start + static_cast<long>(x.core.size()) + static_cast<long>(x.right.size());
    return {lo, hi};
}

Sequence splice(const Sequence& x, const Sequence& y)
{
    Sequence z;
    long s = std::min(y.start, 0L);
    long end = std::max(x.start + static_cast<long>(x.core.size()), 0L);
    long ll = static_cast<long>(y.left.size()), rl = static_cast<long>(x.right.size());
    z.left.resize(y.left.size());
    for (long j = 0; j < ll; ++j)
        z.left[j] = y.left[pmod(j + s - y.start, ll)];
    for (long i = s; i < 0; ++i)
        z.core.push_back(y.at(i));
    for (long i = 0; i < end; ++i)
        z.core.push_back(x.at(i));
    z.right.resize(x.right.size());
    long xend = x.start + static_cast<long>(x.core.size());
    for (long j = 0; j < rl; ++j)
        z.right[j] = x.right[pmod(j + end - xend, rl)];
    z.start = s;
    return z;
}

bool agree_on_window(const Sequence& x, const Sequence& y, int len)
{
    for (long i = 0; i < len; ++i)
        if (x.at(i) != y.at(i))
            return false;
    return true;
}

} // namespace

int Sequence::at(long i) const
{
    long cs = static_cast<long>(core.size());
    if (i < start)
        return left[pmod(i - start, static_cast<long>(left.size()))];
    if (i < start + cs)
        return core[i - start];
    return right[pmod(i - start - cs, static_cast<long>(right.size()))];
}

Word Sequence::window(long from, std::size_t len) const
{
    Word w(len);
    for (std::size_t j = 0; j < len; ++j)
        w[j] = at(from + static_cast<long>(j));
    return w;
}

Sequence Sequence::shifted(long k) const
{
    Sequence s = *this;
    s.start -= k;
    return s;
}

Sequence Sequence::periodic(const Word& w)
{
    if (w.empty())
        throw Error("BadInput", "empty period");
    return Sequence{w, {}, w, 0};
}

Sequence Sequence::eventually_periodic(const Word& pre, const Word& period, const Word& left)
{
    if (period.empty())
        throw Error("BadInput", "empty period");
    return Sequence{left.empty() ? period : left, pre, period, 0};
}

std::set<Word> factors(const Sequence& x, int n)
{
    std::set<Word> out;
    auto [lo, hi] = window_range(x, n);
    for (long i = lo; i <= hi; ++i)
        out.insert(x.window(i, static_cast<std::size_t>(n)));
    return out;
}

std::set<Word> factors(const SymbolicSet& s, int n)
{
    std::set<Word> out;
    for (auto& g : s.generators) {
        auto f = factors(g, n);
        out.insert(f.begin(), f.end());
    }
    return out;
}

SftHull SftHull::from_words(int k, int n, std::set<Word> words)
{
    if (n < 2)
        throw Error("BadInput", "block length must be at least 2");
    for (auto& w : words) {
        if (static_cast<int>(w.size()) != n)
            throw Error("BadInput", "word of the wrong length");
        check_word(w, k, "word");
    }
    while (true) {
        std::set<Word> pre, suf;
        for (auto& w : words) {
            pre.insert(prefix(w));
            suf.insert(suffix(w));
        }
        std::set<Word> kept;
        for (auto& w : words)
            if (suf.count(prefix(w)) && pre.count(suffix(w)))
                kept.insert(w);
        if (kept.size() == words.size())
            break;
        words = std::move(kept);
    }
    if (words.empty())
        throw Error("EmptySet", "no bi-infinite sequence survives pruning");
    SftHull h;
    h.k_ = k;
    h.n_ = n;
    h.words_ = std::move(words);
    return h;
}

bool SftHull::allows(const Word& w) const
{
    std::size_t n = static_cast<std::size_t>(n_);
    if (w.size() >= n) {
        for (std::size_t i = 0; i + n <= w.size(); ++i)
            if (!words_.count(Word(w.begin() + i, w.begin() + i + n)))
                return false;
        return true;
    }
    for (auto& a : words_)
        for (std::size_t i = 0; i + w.size() <= n; ++i)
            if (std::equal(w.begin(), w.end(), a.begin() + i))
                return true;
    return false;
}

bool SftHull::contains(const Sequence& x) const
{
    auto [lo, hi] = window_range(x, n_);
    for (long i = lo; i <= hi; ++i)
        if (!words_.count(x.window(i, static_cast<std::size_t>(n_))))
            return false;
    return true;
}

std::vector<Word> SftHull::paths(int len) const
{
    std::vector<Word> out;
    if (len <= 0)
        return out;
    if (len <= n_) {
        std::set<Word> sub;
        for (auto& w : words_)
            for (int i = 0; i + len <= n_; ++i)
                sub.insert(Word(w.begin() + i, w.begin() + i + len));
        return {sub.begin(), sub.end()};
    }
    std::map<Word, std::vector<int>> next; // vertex -> last symbols of outgoing words
    for (auto& w : words_)
        next[prefix(w)].push_back(w.back());
    Word cur;
    std::function<void()> extend = [&]() {
        if (static_cast<int>(cur.size()) == len) {
            out.push_back(cur);
            return;
        }
        Word v(cur.end() - (n_ - 1), cur.end());
        auto it = next.find(v);
        if (it == next.end())
            return;
        for (int c : it->second) {
            cur.push_back(c);
            extend();
            cur.pop_back();
        }
    };
    for (auto& w : words_) {
        cur = w;
        extend();
    }
    return out;
}

std::vector<std::pair<Word, std::vector<Word>>> SftHull::adjacency() const
{
    std::map<Word, std::vector<Word>> adj;
    for (auto& w : words_)
        adj[prefix(w)].push_back(suffix(w));
    return {adj.begin(), adj.end()};
}

SftHull hull(const SymbolicSet& s, int n)
{
    if (n < 2)
        throw Error("BadInput", "block length must be at least 2");
    if (s.generators.empty())
        throw Error("EmptySet", "symbolic set has no generators");
    for (auto& g : s.generators) {
        if (g.left.empty() || g.right.empty())
            throw Error("BadInput", "generator needs nonempty periodic tails");
        check_word(g.left, s.k, "generator");
        check_word(g.core, s.k, "generator");
        check_word(g.right, s.k, "generator");
    }
    return SftHull::from_words(s.k, n, factors(s, n));
}

bool sft_contains(const SftHull& outer, const SftHull& inner)
{
    for (auto& w : inner.paths(std::max(outer.block(), inner.block())))
        if (!outer.allows(w))
            return false;
    return true;
}

NeighborhoodReport hull_neighborhood_check(const SymbolicSet& s, const SftHull& h, int max_len)
{
    NeighborhoodReport rep;
    int n = h.block();
    rep.bound = std::ldexp(1.0, -((n - 1) / 2));
    auto fn = factors(s, n);
    for (auto& w : h.words())
        if (!fn.count(w)) {
            rep.window_ok = false;
            rep.witness = w;
            break;
        }
    int m = std::max((max_len - 1) / 2, n / 2);
    rep.radius = m;
    std::vector<std::set<Word>> centered(static_cast<std::size_t>(m + 1));
    for (int r = 0; r <= m; ++r)
        centered[r] = factors(s, 2 * r + 1);
    for (auto& w : h.paths(2 * m + 1)) {
        int best = -1;
        for (int r = 0; r <= m; ++r) {
            if (!centered[r].count(Word(w.begin() + (m - r), w.begin() + (m + r + 1))))
                break;
            best = r;
        }
        rep.worst = std::max(rep.worst, std::ldexp(1.0, -(best + 1)));
        ++rep.enumerated;
    }
    return rep;
}

std::optional<Sequence> symbolic_bracket(const SftHull& h, const Sequence& x, const Sequence& y)
{
    if (!agree_on_window(x, y, h.block() - 1))
        return std::nullopt;
    Sequence z = splice(x, y);
    if (!h.contains(z))
        return std::nullopt;
    return z;
}

std::vector<Sequence> periodic_points(const SftHull& h, int max_period)
{
    std::vector<Sequence> out;
    int k = h.alphabet(), n = h.block();
    for (int p = 1; p <= max_period; ++p) {
        long total = 1;
        for (int i = 0; i < p; ++i)
            total *= k;
        Word w(static_cast<std::size_t>(p));
        for (long code = 0; code < total; ++code) {
            long c = code;
            for (int i = p - 1; i >= 0; --i) {
                w[i] = static_cast<int>(c % k);
                c /= k;
            }
            bool primitive = true;
            for (int d = 1; d < p && primitive; ++d) {
                if (p % d)
                    continue;
                bool rep = true;
                for (int i = 0; i < p && rep; ++i)
                    rep = w[i] == w[(i + d) % p];
                primitive = !rep;
            }
            if (!primitive)
                continue;
            Word cyc(static_cast<std::size_t>(p + n - 1));
            for (int i = 0; i < p + n - 1; ++i)
                cyc[i] = w[i % p];
            if (h.allows(cyc))
                out.push_back(Sequence::periodic(w));
        }
    }
    return out;
}

BracketClosure bracket_closure(const SftHull& h, int max_period)
{
    BracketClosure bc;
    auto pts = periodic_points(h, max_period);
    bc.points = pts.size();
    for (auto& x : pts)
        for (auto& y : pts) {
            ++bc.pairs;
            if (!agree_on_window(x, y, h.block() - 1))
                continue;
            ++bc.compatible;
            Sequence z = splice(x, y);
            if (!h.contains(z)) {
                if (!bc.witness)
                    bc.witness = std::make_pair(x, y);
                ++bc.failures;
            }
        }
    return bc;
}

int HorseshoeCoding::resolution() const
{
    int n = 1;
    for (int i = 0; i < depth; ++i)
        n *= 2 * k;
    return n;
}

std::size_t HorseshoeCoding::cell(const GridSet& g, const Word& window) const
{
    if (static_cast<int>(window.size()) != 2 * depth)
        throw Error("BadInput", "coding window must have length 2 * depth");
    long long x = 0, y = 0;
    for (int i = 0; i < depth; ++i) {
        x = x * 2 * k + 2 * window[depth + i] + 1;
        y = y * 2 * k + 2 * window[depth - 1 - i] + 1;
    }
    return g.index({x, y, 0});
}

GridSet HorseshoeCoding::realize(const std::set<Word>& windows) const
{
    GridSet g(2, resolution());
    for (auto& w : windows)
        g.set(cell(g, w));
    return g;
}

GridSet HorseshoeCoding::realize(const SftHull& h) const
{
    auto p = h.paths(2 * depth);
    return realize(std::set<Word>(p.begin(), p.end()));
}

GridSet HorseshoeCoding::realize(const SymbolicSet& s) const { return realize(factors(s, 2 * depth)); }

Enclosure enclose(const SymbolicSet& lambda0, const GridSet& lambda1, int n, const HorseshoeCoding& coding)
{
    if (lambda1.dim() != 2 || lambda1.resolution() != coding.resolution())
        throw Error("BadInput", "lambda1 must live on the coding grid");
    Enclosure e;
    e.lambda1 = lambda1;
    e.hull_cells = GridSet(2, coding.resolution());
    if (!lambda0.generators.empty()) {
        e.hull = hull(lambda0, n);
        e.hull_cells = coding.realize(*e.hull);
        GridSet meet = e.hull_cells;
        meet &= lambda1;
        if (!meet.empty())
            throw Error("Overlap", "hull meets lambda1 in " + std::to_string(meet.count()) + " cells at n = "
                    + std::to_string(n) + "; increase n");
        e.neighborhood = hull_neighborhood_check(lambda0, *e.hull);
    }
    e.cells = e.hull_cells;
    e.cells |= lambda1;
    e.disjoint = true;
    return e;
}

std::string word_string(const Word& w)
{
    std::string s;
    for (int c : w) {
        if (c < 10)
            s += static_cast<char>('0' + c);
        else
            s += "(" + std::to_string(c) + ")";
    }
    return s;
}

SymbolicSet symbolic_set_from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw Error("BadInput", std::string("symbolic set JSON: ") + ex.what());
    }
    SymbolicSet s;
    try {
        s.k = j.at("k").get<int>();
        for (auto& g : j.at("generators")) {
            Word pre = g.value("pre", Word{});
            Word period = g.at("period").get<Word>();
            Word left = g.value("left", Word{});
            s.generators.push_back(Sequence::eventually_periodic(pre, period, left));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error("BadInput", std::string("symbolic set JSON: ") + ex.what());
    }
    if (s.k < 1)
        throw Error("BadInput", "alphabet size must be positive");
    return s;
}

std::string symbolic_set_to_json(const SymbolicSet& s)
{
    nlohmann::json j;
    j["k"] = s.k;
    j["generators"] = nlohmann::json::array();
    for (auto& g : s.generators) {
        // Re-anchor so the prefix starts at position 0 and the left tail ends at -1.
        long ll = static_cast<long>(g.left.size());
        long end = std::max(g.start + static_cast<long>(g.core.size()), 0L);
        Word left(g.left.size()), pre, right(g.right.size());
        for (long i = 0; i < ll; ++i)
            left[i] = g.at(i - ll);
        for (long i = std::min(g.start, 0L) - ll; i < 0; ++i)
            if (g.at(i) != left[pmod(i, ll)])
                throw Error("BadInput", "generator is not periodic left of position 0");
        for (long i = 0; i < end; ++i)
            pre.push_back(g.at(i));
        for (long i = 0; i < static_cast<long>(right.size()); ++i)
            right[i] = g.at(end + i);
        nlohmann::json e;
        e["left"] = left;
        e["pre"] = pre;
        e["period"] = right;
        j["generators"].push_back(e);
    }
    return j.dump(2);
}

std::string hull_to_json(const SftHull& h)
{
    nlohmann::json j;
    j["k"] = h.alphabet();
    j["n"] = h.block();
    j["words"] = nlohmann::json::array();
    for (auto& w : h.words())
        j["words"].push_back(word_string(w));
    nlohmann::json adj = nlohmann::json::object();
    for (auto& [v, outs] : h.adjacency()) {
        nlohmann::json a = nlohmann::json::array();
        for (auto& o : outs)
            a.push_back(word_string(o));
        adj[word_string(v)] = a;
    }
    j["adjacency"] = adj;
    return j.dump(2);
}

} // namespace hyperdyn
