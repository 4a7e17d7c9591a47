#ifndef HYPERFC_CONFIG_HPP
#define HYPERFC_CONFIG_HPP

#include <set>
#include <string>

#include <json.hpp>

#include "hyperfc/dataset.hpp"
#include "hyperfc/synthgen.hpp"
#include "hyperfc/training.hpp"

namespace hyperfc {

// Flat key=value experiment configuration ('#' comments, blank lines
// allowed). Unknown keys are rejected; the resolved values are echoed
// into every report for provenance. CLI flags override file keys.
struct ExperimentConfig {
    CsvPaths data;
    std::string registry_path;
    std::string out_dir = "out";
    TrainConfig train;
    GeneratorConfig generator;

    static ExperimentConfig load(const std::string& path);
    // Applies one key=value assignment (ConfigError on unknown key or
    // unparsable value).
    void set(const std::string& key, const std::string& value);
    bool explicitly_set(const std::string& key) const {
        return explicit_keys.count(key) > 0;
    }
    std::set<std::string> explicit_keys;

    nlohmann::json echo() const;
};

} // namespace hyperfc

#endif
