#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ampsim/core_data.hpp"
#include "ampsim/hours.hpp"

namespace ampsim {

// One dispatchable step of the hour's supply stack.
struct StackSegment {
    std::string unit_id;
    int segment = 0;
    double price = 0.0;     // $/MWh
    double quantity = 0.0;  // MW
};

struct DispatchedSegment {
    std::string unit_id;
    int segment = 0;
    double accepted_mw = 0.0;
    double price = 0.0;
};

struct ClearingResult {
    HourId hour = 0;              // hour of the cleared offers (0 for ad-hoc stacks)
    double clearing_price = 0.0;  // price of the marginal step
    double total_cost = 0.0;      // sum of accepted MW x step price
    bool feasible = true;
    std::vector<DispatchedSegment> dispatched;  // merit order
};

// Dispatchable steps for an hour: UNAVAILABLE units and zero-quantity steps
// drop out; MUST_RUN and ECONOMIC steps stay.
std::vector<StackSegment> build_stack(std::span<const IncrementalOffer> offers_at_hour);

// Merit-order clearing with a divisible marginal step. Steps are taken in
// ascending (price, unit_id, segment) order until cumulative quantity covers
// load; the marginal step is accepted partially so the cumulative dispatch
// equals load. The clearing price is the marginal step's offer price.
// Throws EmptyStack when no step is dispatchable and InsufficientSupply when
// total stack quantity < load.
ClearingResult clear(std::span<const StackSegment> stack, double load);
ClearingResult clear(std::span<const IncrementalOffer> offers_at_hour, double load);

// Same as clear() but on shortfall returns feasible=false with the whole
// stack dispatched and the most expensive step marginal, instead of throwing.
// Reporting paths that must emit a row per hour use this.
ClearingResult try_clear(std::span<const StackSegment> stack, double load);

// Exact indivisible-block selection: choose whole steps (each fully in or
// fully out) minimizing total as-bid cost subject to the selected quantity
// covering load; the clearing price is the highest accepted price. The cost
// being minimized is sum x*p*q with the demand constraint sum x*q >= load
// (the quantity form; a price-weighted demand constraint would not be
// dimensionally meaningful). Branch-and-bound with a fractional lower bound;
// exact, and fast for the ~100-segment instances it is meant for.
ClearingResult clear_ilp_oracle(std::span<const StackSegment> stack, double load);
ClearingResult clear_ilp_oracle(std::span<const IncrementalOffer> offers_at_hour, double load);

// Clears the same load against the original offers and a mitigated stack,
// returning (unmitigated, mitigated). With the min(original, reference)
// mitigation rule the mitigated price never exceeds the unmitigated one.
std::pair<ClearingResult, ClearingResult> clear_mitigated(
    std::span<const IncrementalOffer> offers_at_hour,
    std::span<const StackSegment> mitigated_stack, double load);

}  // namespace ampsim
