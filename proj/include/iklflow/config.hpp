#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "iklflow/flow.hpp"
#include "iklflow/measure.hpp"

namespace iklflow {

/// Declarative target section of a run config.
struct TargetSpec {
    std::string kind;  // "gaussian" | "gaussian_mixture" | "empirical"
    // gaussian / mixture
    std::vector<GaussianComponent> components;
    Vec mixture_weights;
    // empirical
    std::string csv_path;
    bool with_mass = false;

    bool operator==(const TargetSpec &other) const;
};

/// Declarative initial-ensemble section.
struct InitSpec {
    std::string kind;  // "gaussian" | "target" | "csv"
    long n = 0;
    Vec mean;
    Mat cov;
    std::string csv_path;
    bool with_mass = false;

    bool operator==(const InitSpec &other) const;
};

struct RunSpec {
    FlowConfig flow;
    TargetSpec target;
    InitSpec init;

    bool operator==(const RunSpec &other) const;
};

/// Parses the JSON run config (// comments allowed). Schema violations
/// raise ParseError with the offending field path; cross-field
/// constraint violations raise ConfigError.
RunSpec parse_config(const std::string &path);
RunSpec parse_config_text(const std::string &text);

/// serialize then parse is the identity on valid specs.
std::string serialize_config(const RunSpec &spec);
nlohmann::json config_to_json(const RunSpec &spec);

/// Instantiates the declared target / initial ensemble. The init seed
/// is derived from the flow seed so a config fully determines the run.
Target build_target(const TargetSpec &spec);
Ensemble build_init(const InitSpec &spec, const Target &target,
                    std::uint64_t seed);

/// CSV rows x_1,...,x_d[,mass]; no header.
DiscreteMeasure load_csv_measure(const std::string &path, bool with_mass);

std::string flow_kind_name(FlowKind kind);
FlowKind flow_kind_from_name(const std::string &name);

}  // namespace iklflow
