#pragma once

#include <string>

#include <json.hpp>

#include "propauction/conversion.hpp"
#include "propauction/harness.hpp"
#include "propauction/welfare.hpp"

namespace propauction {

using Json = nlohmann::json;

// Non-finite doubles are written as the strings "inf", "-inf" and "nan".
Json number_to_json(double x);
double number_from_json(const Json& j);

Json to_json(const ValuationSpec& v);
ValuationSpec valuation_from_json(const Json& j);
Json to_json(const AgentSpec& a);
Json to_json(const Instance& inst);
Instance instance_from_json(const Json& j);

Json to_json(const BidMatrix& bids);
BidMatrix bids_from_json(const Json& j);

/// `eps_auto` is written as "eps": null.
Json to_json(const MechanismSpec& mech, bool eps_auto = false);
MechanismSpec mechanism_from_json(const Json& j, bool* eps_auto = nullptr);

Json to_json(const SolverParams& p);
SolverParams solver_params_from_json(const Json& j);
Json to_json(const DynamicsParams& p);
DynamicsParams dynamics_params_from_json(const Json& j);

Json to_json(const Distribution& d);
Distribution distribution_from_json(const Json& j);
Json to_json(const GeneratorSpec& g);
GeneratorSpec generator_from_json(const Json& j);

Json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::string& path);

Json to_json(const DualCertificate& c);
DualCertificate certificate_from_json(const Json& j);
Json to_json(const FeasibilityReport& r);

Json to_json(const ConversionReport& r);
Json to_json(const ExpectationCheck& r);

Json to_json(const ResultsRow& r);
ResultsRow results_row_from_json(const Json& j);

Json to_json(const SearchResult& r);
Json to_json(const SweepRow& r);

}  // namespace propauction
