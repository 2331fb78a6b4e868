#include "cbo/estimation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cbo/rng.hpp"

namespace cbo {

namespace {

constexpr std::size_t kMinFitRows = 5;
constexpr std::size_t kTableCap = 1200;     // above this, skip n*n kernel tables
constexpr std::size_t kMaxMcSamples = 1000;

double column_mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double column_variance(const std::vector<double>& v) {
    double m = column_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
}

// Median pairwise absolute difference over a deterministic subsample.
double median_pairwise(const std::vector<double>& col) {
    const std::size_t n = col.size();
    const std::size_t m = std::min<std::size_t>(n, 400);
    std::vector<double> sub(m);
    for (std::size_t i = 0; i < m; ++i) sub[i] = col[i * n / m];
    std::vector<double> diffs;
    diffs.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) diffs.push_back(std::abs(sub[i] - sub[j]));
    }
    if (diffs.empty()) return 0.0;
    auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
    std::nth_element(diffs.begin(), mid, diffs.end());
    return *mid;
}

}  // namespace

NwRegressor::NwRegressor(const Dataset& data, NodeId target, std::vector<NodeId> givens,
                         const std::vector<int>& table_dims)
    : givens_(std::move(givens)), n_(data.rows) {
    if (n_ < kMinFitRows) {
        raise(ErrorKind::InsufficientData,
              "regressor needs at least " + std::to_string(kMinFitRows) + " rows, got " +
                  std::to_string(n_));
    }
    const auto& y = data.column(target);
    y_ = y;
    y2_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) y2_[i] = y[i] * y[i];

    const double d = static_cast<double>(givens_.size());
    const double shrink = std::pow(static_cast<double>(n_), -1.0 / (4.0 + d));
    cols_.reserve(givens_.size());
    bandwidths_.reserve(givens_.size());
    for (const auto& g : givens_) {
        const auto& col = data.column(g);
        double scale = median_pairwise(col);
        if (scale <= 0.0) scale = std::sqrt(column_variance(col));
        if (scale <= 0.0) {
            raise(ErrorKind::DegenerateColumn, "given column '" + g + "' has zero spread");
        }
        cols_.push_back(col);
        bandwidths_.push_back(scale * shrink);
    }

    tables_.resize(givens_.size());
    if (n_ <= kTableCap) {
        for (int dim_index : table_dims) {
            const auto dim = static_cast<std::size_t>(dim_index);
            const auto& col = cols_[dim];
            const double inv = 1.0 / (2.0 * bandwidths_[dim] * bandwidths_[dim]);
            auto& table = tables_[dim];
            table.resize(n_ * n_);
            for (std::size_t j = 0; j < n_; ++j) {
                for (std::size_t i = 0; i < n_; ++i) {
                    double delta = col[j] - col[i];
                    table[j * n_ + i] = std::exp(-delta * delta * inv);
                }
            }
        }
    }
}

namespace {

// Weighted local-linear moments: intercept plus up to kMaxLinear slope
// dimensions on bandwidth-normalized displacements. Falls back to the
// kernel-weighted mean when the effective sample size cannot support slopes
// or the normal equations degenerate.
constexpr int kMaxLinear = 7;

struct LocalFit {
    int m = 1;
    double A[kMaxLinear + 1][kMaxLinear + 1] = {};
    double by[kMaxLinear + 1] = {};
    double by2[kMaxLinear + 1] = {};
    double sw2 = 0.0;

    void reset(int dims) {
        m = dims + 1;
        for (int i = 0; i < m; ++i) {
            by[i] = by2[i] = 0.0;
            for (int j = 0; j <= i; ++j) A[i][j] = 0.0;
        }
        sw2 = 0.0;
    }

    // z holds the slope displacements (length m-1).
    inline void add(double w, const double* z, double y, double y2) {
        A[0][0] += w;
        by[0] += w * y;
        by2[0] += w * y2;
        sw2 += w * w;
        for (int i = 1; i < m; ++i) {
            double wz = w * z[i - 1];
            A[i][0] += wz;
            for (int j = 1; j <= i; ++j) A[i][j] += wz * z[j - 1];
            by[i] += wz * y;
            by2[i] += wz * y2;
        }
    }

    NwRegressor::Prediction solve() const {
        NwRegressor::Prediction p;
        const double sw = A[0][0];
        if (sw <= 0.0 || !std::isfinite(sw)) {
            p.ess = 1.0;
            return p;
        }
        p.ess = sw * sw / sw2;
        p.mean = by[0] / sw;
        p.second_moment = by2[0] / sw;
        if (m == 1 || p.ess < 2.0 * static_cast<double>(m)) return p;

        // Ridge on the slope block keeps collinear displacements tame.
        double L[kMaxLinear + 1][kMaxLinear + 1];
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j <= i; ++j) L[i][j] = A[i][j];
        }
        for (int i = 1; i < m; ++i) L[i][i] += 1e-4 * sw;
        // In-place Cholesky; bail out to the kernel mean on degeneracy.
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s = L[i][j];
                for (int k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
                if (i == j) {
                    if (s <= 0.0) return p;
                    L[i][i] = std::sqrt(s);
                } else {
                    L[i][j] = s / L[j][j];
                }
            }
        }
        auto back_solve = [&](const double* rhs) {
            double t[kMaxLinear + 1];
            for (int i = 0; i < m; ++i) {
                double s = rhs[i];
                for (int k = 0; k < i; ++k) s -= L[i][k] * t[k];
                t[i] = s / L[i][i];
            }
            for (int i = m - 1; i >= 0; --i) {
                double s = t[i];
                for (int k = i + 1; k < m; ++k) s -= L[k][i] * t[k];
                t[i] = s / L[i][i];
            }
            return t[0];  // intercept = prediction at the query
        };
        p.mean = back_solve(by);
        p.second_moment = back_solve(by2);
        return p;
    }
};

}  // namespace

NwRegressor::Prediction NwRegressor::predict(const std::vector<double>& query) const {
    if (query.size() != givens_.size()) {
        raise(ErrorKind::DimensionMismatch, "query arity does not match givens");
    }
    if (givens_.empty()) {
        Prediction p;
        p.mean = column_mean(y_);
        p.second_moment = column_mean(y2_);
        p.ess = static_cast<double>(n_);
        return p;
    }
    const int dims = std::min<int>(static_cast<int>(givens_.size()), kMaxLinear);
    std::vector<double> logw(n_, 0.0);
    for (std::size_t dim = 0; dim < givens_.size(); ++dim) {
        const double inv = 1.0 / (2.0 * bandwidths_[dim] * bandwidths_[dim]);
        const auto& col = cols_[dim];
        const double q = query[dim];
        for (std::size_t i = 0; i < n_; ++i) {
            double delta = q - col[i];
            logw[i] -= delta * delta * inv;
        }
    }
    double shift = *std::max_element(logw.begin(), logw.end());
    LocalFit fit;
    fit.reset(dims);
    double z[kMaxLinear];
    for (std::size_t i = 0; i < n_; ++i) {
        double w = std::exp(logw[i] - shift);
        for (int d = 0; d < dims; ++d) {
            z[d] = (cols_[static_cast<std::size_t>(d)][i] - query[static_cast<std::size_t>(d)]) /
                   bandwidths_[static_cast<std::size_t>(d)];
        }
        fit.add(w, z, y_[i], y2_[i]);
    }
    return fit.solve();
}

NwRegressor::Evaluator NwRegressor::evaluator(const std::vector<int>& scalar_dims,
                                              const std::vector<double>& scalars,
                                              const std::vector<int>& row_dims) const {
    Evaluator ev;
    ev.owner_ = this;
    ev.row_dims_ = row_dims;
    std::vector<double> logw(n_, 0.0);
    for (std::size_t k = 0; k < scalar_dims.size(); ++k) {
        const std::size_t dim = static_cast<std::size_t>(scalar_dims[k]);
        const double inv = 1.0 / (2.0 * bandwidths_[dim] * bandwidths_[dim]);
        const auto& col = cols_[dim];
        const double q = scalars[k];
        for (std::size_t i = 0; i < n_; ++i) {
            double delta = q - col[i];
            logw[i] -= delta * delta * inv;
        }
    }
    double shift = scalar_dims.empty() ? 0.0 : *std::max_element(logw.begin(), logw.end());
    ev.scalar_weight_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) ev.scalar_weight_[i] = std::exp(logw[i] - shift);
    // Slopes act on the scalar dims only; resampled dims sit at data values
    // where kernel averaging is unbiased over the draw distribution.
    const std::size_t slope_dims = std::min<std::size_t>(scalar_dims.size(), kMaxLinear);
    ev.scalar_disp_.resize(slope_dims);
    for (std::size_t k = 0; k < slope_dims; ++k) {
        const std::size_t dim = static_cast<std::size_t>(scalar_dims[k]);
        const auto& col = cols_[dim];
        auto& disp = ev.scalar_disp_[k];
        disp.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) disp[i] = (col[i] - scalars[k]) / bandwidths_[dim];
    }
    return ev;
}

NwRegressor::Prediction NwRegressor::Evaluator::at_rows(const std::vector<int>& rows) const {
    const NwRegressor& r = *owner_;
    const std::size_t n = r.n_;
    const int dims = static_cast<int>(scalar_disp_.size());
    LocalFit fit;
    fit.reset(dims);
    double z[kMaxLinear];
    for (std::size_t i = 0; i < n; ++i) {
        double w = scalar_weight_[i];
        for (std::size_t k = 0; k < row_dims_.size(); ++k) {
            const std::size_t dim = static_cast<std::size_t>(row_dims_[k]);
            const auto& table = r.tables_[dim];
            if (!table.empty()) {
                w *= table[static_cast<std::size_t>(rows[k]) * n + i];
            } else {
                const double inv = 1.0 / (2.0 * r.bandwidths_[dim] * r.bandwidths_[dim]);
                double delta = r.cols_[dim][static_cast<std::size_t>(rows[k])] - r.cols_[dim][i];
                w *= std::exp(-delta * delta * inv);
            }
        }
        for (int d = 0; d < dims; ++d) z[d] = scalar_disp_[static_cast<std::size_t>(d)][i];
        fit.add(w, z, r.y_[i], r.y2_[i]);
    }
    Prediction p = fit.solve();
    if (fit.A[0][0] <= 0.0 || !std::isfinite(fit.A[0][0])) {
        // Every product underflowed; answer with the row the scalar part
        // likes best so the estimator stays total.
        double best = -1.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (scalar_weight_[i] > best) {
                best = scalar_weight_[i];
                arg = i;
            }
        }
        p.mean = r.y_[arg];
        p.second_moment = r.y2_[arg];
        p.ess = 1.0;
    }
    return p;
}

namespace {

std::string trim_ws(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_top_level(const std::string& s, char sep) {
    std::vector<std::string> parts;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '(') depth++;
        if (c == ')') depth--;
        if (c == sep && depth == 0) {
            parts.push_back(trim_ws(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim_ws(cur).empty()) parts.push_back(trim_ws(cur));
    return parts;
}

// Parses "name(args)" and returns {name, args}; empty name on mismatch.
std::pair<std::string, std::string> parse_call(const std::string& s) {
    auto open = s.find('(');
    if (open == std::string::npos || s.back() != ')') return {"", ""};
    return {trim_ws(s.substr(0, open)), s.substr(open + 1, s.size() - open - 2)};
}

PlanDraw parse_draw(const std::string& text, std::size_t lineno) {
    auto tilde = text.find('~');
    if (tilde == std::string::npos) {
        raise(ErrorKind::SyntaxError,
              "line " + std::to_string(lineno) + ": draw needs '<alias>~marg(...)' or '~cond(...)'");
    }
    PlanDraw draw;
    std::string alias_part = trim_ws(text.substr(0, tilde));
    if (!alias_part.empty() && alias_part.front() == '(') {
        if (alias_part.back() != ')') {
            raise(ErrorKind::SyntaxError, "line " + std::to_string(lineno) + ": bad alias tuple");
        }
        for (auto& a : split_top_level(alias_part.substr(1, alias_part.size() - 2), ',')) {
            draw.aliases.push_back(a);
        }
    } else {
        draw.aliases.push_back(alias_part);
    }
    auto [fn, args] = parse_call(trim_ws(text.substr(tilde + 1)));
    if (fn == "marg") {
        for (auto& v : split_top_level(args, ',')) draw.vars.push_back(v);
    } else if (fn == "cond") {
        draw.conditional = true;
        auto bar = args.find('|');
        if (bar == std::string::npos) {
            raise(ErrorKind::SyntaxError, "line " + std::to_string(lineno) + ": cond needs '|'");
        }
        for (auto& v : split_top_level(args.substr(0, bar), ',')) draw.vars.push_back(v);
        for (auto& g : split_top_level(args.substr(bar + 1), ',')) {
            auto eq = g.find('=');
            if (eq == std::string::npos) {
                draw.cond_givens.emplace_back(g, g);  // bare: intervention value of the column
            } else {
                draw.cond_givens.emplace_back(trim_ws(g.substr(0, eq)), trim_ws(g.substr(eq + 1)));
            }
        }
    } else {
        raise(ErrorKind::SyntaxError,
              "line " + std::to_string(lineno) + ": unknown draw kind '" + fn + "'");
    }
    if (draw.aliases.size() != draw.vars.size()) {
        raise(ErrorKind::SyntaxError,
              "line " + std::to_string(lineno) + ": alias tuple arity does not match variables");
    }
    return draw;
}

PlanBody parse_body(const std::string& text, std::size_t lineno) {
    PlanBody body;
    auto [fn, args] = parse_call(trim_ws(text));
    if (fn == "mean") {
        body.mean_only = true;
        body.target = trim_ws(args);
        return body;
    }
    if (fn != "reg") {
        raise(ErrorKind::SyntaxError, "line " + std::to_string(lineno) + ": expected reg(...) body");
    }
    auto bar = args.find('|');
    if (bar == std::string::npos) {
        raise(ErrorKind::SyntaxError, "line " + std::to_string(lineno) + ": reg needs '|'");
    }
    body.target = trim_ws(args.substr(0, bar));
    for (auto& g : split_top_level(args.substr(bar + 1), ',')) {
        auto eq = g.find('=');
        if (eq == std::string::npos) {
            body.givens.emplace_back(g, g);
        } else {
            body.givens.emplace_back(trim_ws(g.substr(0, eq)), trim_ws(g.substr(eq + 1)));
        }
    }
    return body;
}

// Free variables: references that are not draw aliases.
void finish_plan(EstimandPlan& plan) {
    std::set<std::string> aliases;
    for (const auto& d : plan.draws) {
        for (const auto& a : d.aliases) aliases.insert(a);
    }
    for (const auto& d : plan.draws) {
        for (const auto& [col, ref] : d.cond_givens) {
            if (!aliases.count(ref)) plan.free_vars.insert(ref);
        }
    }
    for (const auto& [col, ref] : plan.body.givens) {
        if (!aliases.count(ref)) plan.free_vars.insert(ref);
    }
}

EstimandPlan parse_plan_text(const std::string& text, std::size_t lineno) {
    EstimandPlan plan;
    plan.source = text;
    std::string t = trim_ws(text);
    if (t.rfind("avg", 0) == 0) {
        auto open = t.find('(');
        auto brace = t.find('{');
        auto close_paren = t.rfind(')', brace);
        auto close_brace = t.rfind('}');
        if (open == std::string::npos || brace == std::string::npos ||
            close_brace == std::string::npos || close_paren == std::string::npos) {
            raise(ErrorKind::SyntaxError,
                  "line " + std::to_string(lineno) + ": expected avg(draws) { reg(...) }");
        }
        std::string draws_text = t.substr(open + 1, close_paren - open - 1);
        for (auto& d : split_top_level(draws_text, ',')) plan.draws.push_back(parse_draw(d, lineno));
        plan.body = parse_body(trim_ws(t.substr(brace + 1, close_brace - brace - 1)), lineno);
    } else {
        plan.body = parse_body(t, lineno);
    }
    finish_plan(plan);
    return plan;
}

NodeSet parse_set_names(const std::string& text) {
    NodeSet out;
    for (auto& n : split_top_level(text, ',')) {
        if (!n.empty()) out.insert(n);
    }
    return out;
}

}  // namespace

PlanPtr EstimandRegistry::find(const NodeSet& set) const {
    auto it = plans.find(format_node_set(set));
    return it == plans.end() ? nullptr : it->second;
}

EstimandRegistry parse_estimand_registry(const std::string& text, const CausalGraph& graph) {
    EstimandRegistry registry;
    registry.target = graph.target();
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim_ws(line);
        if (line.empty()) continue;
        if (line.rfind("set", 0) != 0) {
            raise(ErrorKind::SyntaxError, "line " + std::to_string(lineno) + ": expected 'set ... : ...'");
        }
        auto colon = line.find(':');
        if (colon == std::string::npos) {
            raise(ErrorKind::SyntaxError, "line " + std::to_string(lineno) + ": missing ':'");
        }
        NodeSet set = parse_set_names(trim_ws(line.substr(3, colon - 3)));
        for (const auto& n : set) {
            if (!graph.has_node(n)) {
                raise(ErrorKind::UnknownNode,
                      "line " + std::to_string(lineno) + ": unknown node '" + n + "'");
            }
        }
        std::string rhs = trim_ws(line.substr(colon + 1));
        if (rhs.rfind("alias", 0) == 0) {
            NodeSet ref = parse_set_names(trim_ws(rhs.substr(5)));
            auto it = registry.plans.find(format_node_set(ref));
            if (it == registry.plans.end()) {
                raise(ErrorKind::NoEstimand, "line " + std::to_string(lineno) + ": alias target " +
                                                 format_node_set(ref) + " not declared yet");
            }
            registry.plans[format_node_set(set)] = it->second;
            continue;
        }
        EstimandPlan plan = parse_plan_text(rhs, lineno);
        // Declared plans must read exactly the intervention values of their set.
        if (plan.free_vars != std::set<std::string>(set.begin(), set.end())) {
            raise(ErrorKind::PlanMismatch,
                  "line " + std::to_string(lineno) + ": plan free variables do not match set " +
                      format_node_set(set));
        }
        if (plan.body.target != registry.target && !plan.body.mean_only) {
            raise(ErrorKind::PlanMismatch,
                  "line " + std::to_string(lineno) + ": body target is not the graph target");
        }
        registry.plans[format_node_set(set)] = std::make_shared<EstimandPlan>(std::move(plan));
    }
    return registry;
}

CompiledPlan::CompiledPlan(PlanPtr plan, std::shared_ptr<const Dataset> data)
    : plan_(std::move(plan)), data_(std::move(data)) {
    int draw_index = 0;
    for (const auto& d : plan_->draws) {
        for (std::size_t c = 0; c < d.aliases.size(); ++c) {
            alias_slots_[d.aliases[c]] = {draw_index, static_cast<int>(c)};
        }
        ++draw_index;
    }
    if (!plan_->body.mean_only) {
        std::vector<NodeId> given_cols;
        for (const auto& [col, ref] : plan_->body.givens) given_cols.push_back(col);
        std::vector<int> table_dims;
        for (std::size_t gi = 0; gi < plan_->body.givens.size(); ++gi) {
            const auto& [col, ref] = plan_->body.givens[gi];
            Ref r = resolve(ref, col);
            if (r.from_alias) {
                const auto& d = plan_->draws[static_cast<std::size_t>(r.draw_index)];
                if (d.vars[static_cast<std::size_t>(r.component)] != col) fast_rows_ = false;
                table_dims.push_back(static_cast<int>(gi));
            }
            given_refs_.push_back(r);
        }
        if (!fast_rows_) table_dims.clear();
        regressor_ = NwRegressor(*data_, plan_->body.target, given_cols, table_dims);
    } else {
        if (data_->rows < kMinFitRows) {
            raise(ErrorKind::InsufficientData, "mean plan needs at least 5 rows");
        }
    }
    for (const auto& d : plan_->draws) {
        std::vector<Ref> refs;
        for (const auto& [col, ref] : d.cond_givens) refs.push_back(resolve(ref, col));
        cond_refs_.push_back(std::move(refs));
    }
}

CompiledPlan::Ref CompiledPlan::resolve(const std::string& ref, const NodeId&) const {
    Ref r;
    auto it = alias_slots_.find(ref);
    if (it != alias_slots_.end()) {
        r.from_alias = true;
        r.draw_index = it->second.first;
        r.component = it->second.second;
    } else {
        r.intervention = ref;
    }
    return r;
}

PlanResult CompiledPlan::evaluate(const std::map<NodeId, double>& xs, std::uint64_t seed,
                                  std::size_t mc_samples) const {
    const std::size_t n = data_->rows;
    for (const auto& v : plan_->free_vars) {
        if (!xs.count(v)) {
            raise(ErrorKind::PlanMismatch, "plan needs an intervention value for '" + v + "'");
        }
    }
    if (plan_->body.mean_only) {
        const auto& y = data_->column(plan_->body.target);
        PlanResult out;
        out.mean = column_mean(y);
        double m2 = 0.0;
        for (double v : y) m2 += v * v;
        out.second_moment = m2 / static_cast<double>(n);
        out.mean_inv_ess = 1.0 / static_cast<double>(n);
        return out;
    }

    const std::size_t m_draws =
        plan_->draws.empty()
            ? 1
            : (mc_samples > 0 ? mc_samples : std::min<std::size_t>(n, kMaxMcSamples));
    Rng rng(mix_seed(seed));

    // Column handles for draw variables.
    std::vector<std::vector<const std::vector<double>*>> draw_cols;
    for (const auto& d : plan_->draws) {
        std::vector<const std::vector<double>*> cols;
        for (const auto& v : d.vars) cols.push_back(&data_->column(v));
        draw_cols.push_back(std::move(cols));
    }

    const std::size_t k_neighbors =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n)))));

    // Conditional draws whose conditioning values are fixed across MC samples
    // get their neighbor list once.
    struct CondState {
        bool fixed = true;
        std::vector<int> neighbors;
        std::vector<const std::vector<double>*> cols;   // conditioning columns
        std::vector<double> scales;                     // per-column spread
    };
    std::vector<CondState> cond_states(plan_->draws.size());
    for (std::size_t di = 0; di < plan_->draws.size(); ++di) {
        const auto& d = plan_->draws[di];
        if (!d.conditional) continue;
        auto& st = cond_states[di];
        for (std::size_t gi = 0; gi < d.cond_givens.size(); ++gi) {
            st.cols.push_back(&data_->column(d.cond_givens[gi].first));
            double spread = std::sqrt(column_variance(*st.cols.back()));
            st.scales.push_back(spread > 0 ? spread : 1.0);
            if (cond_refs_[di][gi].from_alias) st.fixed = false;
        }
    }
    auto nearest_rows = [&](const CondState& st, const std::vector<double>& values) {
        if (n == 0) raise(ErrorKind::NoNeighbors, "no rows available for conditional resampling");
        std::vector<std::pair<double, int>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < st.cols.size(); ++c) {
                double delta = (values[c] - (*st.cols[c])[i]) / st.scales[c];
                s += delta * delta;
            }
            dist[i] = {s, static_cast<int>(i)};
        }
        std::size_t k = std::min(k_neighbors, n);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        std::vector<int> rows(k);
        for (std::size_t i = 0; i < k; ++i) rows[i] = dist[i].second;
        return rows;
    };

    // Prepare the regressor evaluator: intervention-bound givens are scalar.
    std::vector<int> scalar_dims, row_dims;
    std::vector<double> scalars;
    std::vector<int> row_dim_to_draw;
    for (std::size_t gi = 0; gi < given_refs_.size(); ++gi) {
        const Ref& r = given_refs_[gi];
        if (r.from_alias && fast_rows_) {
            row_dims.push_back(static_cast<int>(gi));
            row_dim_to_draw.push_back(r.draw_index);
        } else if (!r.from_alias) {
            scalar_dims.push_back(static_cast<int>(gi));
            scalars.push_back(xs.at(r.intervention));
        }
    }
    const bool fast = fast_rows_;
    NwRegressor::Evaluator ev;
    if (fast) ev = regressor_.evaluator(scalar_dims, scalars, row_dims);

    std::vector<int> drawn_rows(plan_->draws.size(), 0);
    std::vector<double> cond_values;
    std::vector<int> body_rows(row_dims.size(), 0);
    double acc_mean = 0.0, acc_m2 = 0.0, acc_inv_ess = 0.0;
    for (std::size_t s = 0; s < m_draws; ++s) {
        for (std::size_t di = 0; di < plan_->draws.size(); ++di) {
            const auto& d = plan_->draws[di];
            if (!d.conditional) {
                drawn_rows[di] = static_cast<int>(rng.index(n));
                continue;
            }
            auto& st = cond_states[di];
            cond_values.clear();
            for (std::size_t gi = 0; gi < d.cond_givens.size(); ++gi) {
                const Ref& r = cond_refs_[di][gi];
                if (r.from_alias) {
                    int row = drawn_rows[static_cast<std::size_t>(r.draw_index)];
                    const auto& cols = draw_cols[static_cast<std::size_t>(r.draw_index)];
                    cond_values.push_back((*cols[static_cast<std::size_t>(r.component)])[static_cast<std::size_t>(row)]);
                } else {
                    cond_values.push_back(xs.at(r.intervention));
                }
            }
            if (st.fixed) {
                if (st.neighbors.empty()) st.neighbors = nearest_rows(st, cond_values);
                drawn_rows[di] = st.neighbors[rng.index(st.neighbors.size())];
            } else {
                auto rows = nearest_rows(st, cond_values);
                drawn_rows[di] = rows[rng.index(rows.size())];
            }
        }
        NwRegressor::Prediction pred;
        if (fast) {
            for (std::size_t k = 0; k < row_dims.size(); ++k) {
                body_rows[k] = drawn_rows[static_cast<std::size_t>(row_dim_to_draw[k])];
            }
            pred = ev.at_rows(body_rows);
        } else {
            std::vector<double> q(given_refs_.size());
            for (std::size_t gi = 0; gi < given_refs_.size(); ++gi) {
                const Ref& r = given_refs_[gi];
                if (r.from_alias) {
                    int row = drawn_rows[static_cast<std::size_t>(r.draw_index)];
                    const auto& cols = draw_cols[static_cast<std::size_t>(r.draw_index)];
                    q[gi] = (*cols[static_cast<std::size_t>(r.component)])[static_cast<std::size_t>(row)];
                } else {
                    q[gi] = xs.at(r.intervention);
                }
            }
            pred = regressor_.predict(q);
        }
        acc_mean += pred.mean;
        acc_m2 += pred.second_moment;
        acc_inv_ess += 1.0 / std::max(pred.ess, 1.0);
    }
    PlanResult out;
    const double inv_m = 1.0 / static_cast<double>(m_draws);
    out.mean = acc_mean * inv_m;
    out.second_moment = acc_m2 * inv_m;
    out.mean_inv_ess = acc_inv_ess * inv_m;
    return out;
}

PlanResult evaluate_plan(const EstimandPlan& plan, const Dataset& data,
                         const std::map<NodeId, double>& xs, std::uint64_t seed) {
    auto plan_copy = std::make_shared<EstimandPlan>(plan);
    auto data_copy = std::make_shared<Dataset>(data);
    CompiledPlan compiled(plan_copy, data_copy);
    return compiled.evaluate(xs, seed);
}

double backdoor_mean(const Dataset& data, const NodeId& target,
                     const std::map<NodeId, double>& xs, const NodeSet& adjust) {
    for (const auto& [node, value] : xs) {
        if (adjust.count(node)) {
            raise(ErrorKind::PlanMismatch, "adjustment set contains intervened node '" + node + "'");
        }
    }
    std::vector<NodeId> givens;
    for (const auto& [node, value] : xs) givens.push_back(node);
    std::vector<NodeId> adjust_cols(adjust.begin(), adjust.end());
    givens.insert(givens.end(), adjust_cols.begin(), adjust_cols.end());
    std::vector<int> scalar_dims, row_dims;
    std::vector<double> scalars;
    for (std::size_t i = 0; i < givens.size(); ++i) {
        if (i < xs.size()) {
            scalar_dims.push_back(static_cast<int>(i));
        } else {
            row_dims.push_back(static_cast<int>(i));
        }
    }
    NwRegressor reg(data, target, givens, row_dims);
    for (const auto& [node, value] : xs) scalars.push_back(value);
    auto ev = reg.evaluator(scalar_dims, scalars, row_dims);
    double acc = 0.0;
    std::vector<int> rows(row_dims.size());
    for (std::size_t r = 0; r < data.rows; ++r) {
        std::fill(rows.begin(), rows.end(), static_cast<int>(r));
        acc += ev.at_rows(rows).mean;
    }
    return acc / static_cast<double>(data.rows);
}

double frontdoor_mean(const Dataset& data, const NodeId& target,
                      const std::map<NodeId, double>& xs, const FrontdoorSpec& spec,
                      std::uint64_t seed) {
    if (spec.mediators.empty()) {
        raise(ErrorKind::PlanMismatch, "front-door needs at least one mediator");
    }
    EstimandPlan plan;
    auto alias_of = [](const NodeId& n, const char* prefix) { return std::string(prefix) + n; };

    // Joint marginal rows over (pre_context, Xs).
    PlanDraw outer;
    for (const auto& z : spec.pre_context) {
        outer.aliases.push_back(alias_of(z, "z_"));
        outer.vars.push_back(z);
    }
    for (const auto& [x, value] : xs) {
        outer.aliases.push_back(alias_of(x, "xp_"));
        outer.vars.push_back(x);
    }
    plan.draws.push_back(outer);

    // Mediators given pre-context and the do() values.
    PlanDraw med;
    med.conditional = true;
    for (const auto& m : spec.mediators) {
        med.aliases.push_back(alias_of(m, "m_"));
        med.vars.push_back(m);
    }
    for (const auto& z : spec.pre_context) med.cond_givens.emplace_back(z, alias_of(z, "z_"));
    for (const auto& [x, value] : xs) med.cond_givens.emplace_back(x, x);
    plan.draws.push_back(med);

    // Post-mediator context given pre-context, mediators and the marginal Xs'.
    if (!spec.post_mediator.empty()) {
        PlanDraw post;
        post.conditional = true;
        for (const auto& w : spec.post_mediator) {
            post.aliases.push_back(alias_of(w, "w_"));
            post.vars.push_back(w);
        }
        for (const auto& z : spec.pre_context) post.cond_givens.emplace_back(z, alias_of(z, "z_"));
        for (const auto& m : spec.mediators) post.cond_givens.emplace_back(m, alias_of(m, "m_"));
        for (const auto& [x, value] : xs) post.cond_givens.emplace_back(x, alias_of(x, "xp_"));
        plan.draws.push_back(post);
    }

    plan.body.target = target;
    for (const auto& m : spec.mediators) plan.body.givens.emplace_back(m, alias_of(m, "m_"));
    for (const auto& w : spec.post_mediator) plan.body.givens.emplace_back(w, alias_of(w, "w_"));
    for (const auto& [x, value] : xs) plan.body.givens.emplace_back(x, x);
    plan.source = "frontdoor";
    finish_plan(plan);

    auto plan_ptr = std::make_shared<EstimandPlan>(std::move(plan));
    CompiledPlan compiled(plan_ptr, std::make_shared<Dataset>(data));
    return compiled.evaluate(xs, seed, spec.mc_samples).mean;
}

SurfaceValue DoEffectSurface::query(const std::vector<double>& xs) const {
    if (xs.size() != set_.size()) {
        raise(ErrorKind::DimensionMismatch, "surface query arity does not match its set");
    }
    return eval_(xs);
}

DoEffectSurface build_surface(const EstimandRegistry& registry,
                              std::shared_ptr<const Dataset> data, const NodeSet& set,
                              std::uint64_t seed) {
    PlanPtr plan = registry.find(set);
    if (!plan) {
        raise(ErrorKind::NoEstimand, "no registered estimand for " + format_node_set(set));
    }
    auto compiled = std::make_shared<CompiledPlan>(plan, data);
    const double var_y = column_variance(data->column(registry.target));
    std::vector<NodeId> order(set.begin(), set.end());
    std::size_t rows = data->rows;
    auto eval = [compiled, var_y, order, seed](const std::vector<double>& xs) {
        std::map<NodeId, double> assignment;
        for (std::size_t i = 0; i < order.size(); ++i) assignment[order[i]] = xs[i];
        PlanResult r = compiled->evaluate(assignment, seed);
        SurfaceValue v;
        v.mean = r.mean;
        // Interventional variance estimate blended toward (twice) the
        // marginal variance as the kernel support thins out: the conditional
        // moments degenerate at deep extrapolation, while the estimator
        // uncertainty keeps growing.
        const double ie = std::clamp(r.mean_inv_ess, 0.0, 1.0);
        const double cond = std::max(0.0, r.second_moment - r.mean * r.mean);
        v.variance = (1.0 - ie) * cond + 2.0 * var_y * ie;
        return v;
    };
    return DoEffectSurface(set, std::move(eval), rows);
}

}  // namespace cbo
