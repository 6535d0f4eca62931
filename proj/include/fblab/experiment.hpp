#pragma once

#include <string>

#include "fblab/blowup.hpp"

namespace fblab {

// Serialized trace, ordered keys, reloads exactly.
std::string trace_to_json(const BlowupTrace& trace);
BlowupTrace trace_from_json(const std::string& text);

// Iteration table with the fixed column order k,r_total,eps_k,branch,lambda2,kappa_eps.
std::string trace_to_csv(const BlowupTrace& trace);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Runs the config-driven pipeline. Returns 0 on success, 1 when a pipeline
// step fails (artifacts written so far are kept), 2 when the config does not
// parse or validate. out_override, when nonempty, replaces the config's
// output directory.
int run_experiment(const std::string& config_path, const std::string& out_override = "");

}  // namespace fblab
