#include "ampsim/market_clearing.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

#include "ampsim/errors.hpp"

namespace ampsim {
namespace {

bool merit_order(const StackSegment& a, const StackSegment& b) {
    return std::tie(a.price, a.unit_id, a.segment) < std::tie(b.price, b.unit_id, b.segment);
}

std::vector<StackSegment> sorted_stack(std::span<const StackSegment> stack) {
    std::vector<StackSegment> s(stack.begin(), stack.end());
    std::sort(s.begin(), s.end(), merit_order);
    return s;
}

double total_quantity(std::span<const StackSegment> stack) {
    double q = 0.0;
    for (const auto& seg : stack) q += seg.quantity;
    return q;
}

ClearingResult clear_impl(std::span<const StackSegment> stack, double load, bool throw_on_short) {
    if (load < 0.0) fail(Errc::NegativeInput, "load must be >= 0");
    if (stack.empty()) fail(Errc::EmptyStack, "no dispatchable segments");
    auto s = sorted_stack(stack);
    if (throw_on_short && total_quantity(s) < load) {
        fail(Errc::InsufficientSupply, "stack offers " + std::to_string(total_quantity(s)) +
                                           " MW against load " + std::to_string(load));
    }
    ClearingResult r;
    double cum = 0.0;
    r.clearing_price = s.front().price;  // load == 0 clears at the cheapest step
    for (const auto& seg : s) {
        if (cum >= load) break;
        const double take = std::min(seg.quantity, load - cum);
        if (take <= 0.0) continue;
        r.dispatched.push_back({seg.unit_id, seg.segment, take, seg.price});
        r.total_cost += take * seg.price;
        r.clearing_price = seg.price;
        cum += take;
    }
    r.feasible = cum >= load;
    return r;
}

}  // namespace

std::vector<StackSegment> build_stack(std::span<const IncrementalOffer> offers_at_hour) {
    std::vector<StackSegment> stack;
    stack.reserve(offers_at_hour.size());
    for (const auto& o : offers_at_hour) {
        if (o.status == OfferStatus::Unavailable || o.quantity <= 0.0) continue;
        stack.push_back({o.unit_id, o.segment, o.price, o.quantity});
    }
    return stack;
}

ClearingResult clear(std::span<const StackSegment> stack, double load) {
    return clear_impl(stack, load, /*throw_on_short=*/true);
}

ClearingResult clear(std::span<const IncrementalOffer> offers_at_hour, double load) {
    auto stack = build_stack(offers_at_hour);
    auto r = clear_impl(stack, load, /*throw_on_short=*/true);
    if (!offers_at_hour.empty()) r.hour = offers_at_hour.front().hour;
    return r;
}

ClearingResult try_clear(std::span<const StackSegment> stack, double load) {
    return clear_impl(stack, load, /*throw_on_short=*/false);
}

ClearingResult clear_ilp_oracle(std::span<const StackSegment> stack, double load) {
    if (load < 0.0) fail(Errc::NegativeInput, "load must be >= 0");
    if (stack.empty()) fail(Errc::EmptyStack, "no dispatchable segments");
    auto s = sorted_stack(stack);
    if (total_quantity(s) < load) {
        fail(Errc::InsufficientSupply, "stack offers " + std::to_string(total_quantity(s)) +
                                           " MW against load " + std::to_string(load));
    }

    // Negative-price blocks strictly reduce cost and help the demand
    // constraint, so every optimal selection contains all of them. Take them
    // up front and solve the branch-and-bound over the p >= 0 tail.
    std::vector<std::size_t> chosen_negative;
    double residual = load;
    std::size_t first_nonneg = 0;
    while (first_nonneg < s.size() && s[first_nonneg].price < 0.0) {
        chosen_negative.push_back(first_nonneg);
        residual -= s[first_nonneg].quantity;
        ++first_nonneg;
    }
    const std::span<const StackSegment> tail(s.data() + first_nonneg, s.size() - first_nonneg);

    // Suffix quantity for feasibility pruning.
    std::vector<double> suffix_q(tail.size() + 1, 0.0);
    for (std::size_t i = tail.size(); i-- > 0;) {
        suffix_q[i] = suffix_q[i + 1] + tail[i].quantity;
    }

    std::vector<char> in_best(tail.size(), 0);
    std::vector<char> in_cur(tail.size(), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    bool have_best = false;

    // Fractional completion cost from position i with `need` MW still
    // uncovered: cheapest remaining blocks taken divisibly. A valid lower
    // bound for any 0/1 completion.
    auto frac_bound = [&](std::size_t i, double need) {
        double cost = 0.0;
        while (need > 0.0 && i < tail.size()) {
            const double take = std::min(tail[i].quantity, need);
            cost += take * tail[i].price;
            need -= take;
            ++i;
        }
        return cost;
    };

    // Include-first depth-first search with strict-improvement updates: the
    // first complete solution is the sorted prefix cover, and later solutions
    // replace it only when strictly cheaper. On equal-quantity instances this
    // pins the same acceptance set the divisible greedy touches.
    auto dfs = [&](auto&& self, std::size_t i, double need, double cost) -> void {
        if (need <= 0.0) {
            if (!have_best || cost < best_cost) {
                best_cost = cost;
                in_best = in_cur;
                have_best = true;
            }
            return;
        }
        if (i >= tail.size() || suffix_q[i] < need) return;
        if (have_best && cost + frac_bound(i, need) >= best_cost) return;
        in_cur[i] = 1;
        self(self, i + 1, need - tail[i].quantity, cost + tail[i].quantity * tail[i].price);
        in_cur[i] = 0;
        self(self, i + 1, need, cost);
    };
    dfs(dfs, 0, residual, 0.0);

    ClearingResult r;
    double price = -std::numeric_limits<double>::infinity();
    for (std::size_t i : chosen_negative) {
        r.dispatched.push_back({s[i].unit_id, s[i].segment, s[i].quantity, s[i].price});
        r.total_cost += s[i].quantity * s[i].price;
        price = std::max(price, s[i].price);
    }
    for (std::size_t i = 0; i < tail.size(); ++i) {
        if (!in_best[i]) continue;
        r.dispatched.push_back({tail[i].unit_id, tail[i].segment, tail[i].quantity, tail[i].price});
        r.total_cost += tail[i].quantity * tail[i].price;
        price = std::max(price, tail[i].price);
    }
    if (r.dispatched.empty()) {
        r.clearing_price = s.front().price;  // load fully covered by nothing: price floor
    } else {
        r.clearing_price = price;
    }
    r.feasible = true;
    return r;
}

ClearingResult clear_ilp_oracle(std::span<const IncrementalOffer> offers_at_hour, double load) {
    auto stack = build_stack(offers_at_hour);
    auto r = clear_ilp_oracle(stack, load);
    if (!offers_at_hour.empty()) r.hour = offers_at_hour.front().hour;
    return r;
}

std::pair<ClearingResult, ClearingResult> clear_mitigated(
    std::span<const IncrementalOffer> offers_at_hour,
    std::span<const StackSegment> mitigated_stack, double load) {
    ClearingResult unmitigated = clear(offers_at_hour, load);
    ClearingResult mitigated = clear(mitigated_stack, load);
    mitigated.hour = unmitigated.hour;
    return {std::move(unmitigated), std::move(mitigated)};
}

}  // namespace ampsim
