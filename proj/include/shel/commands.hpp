#pragma once

#include <string>

#include "shel/config.hpp"

namespace shel::cmd {

// Command bodies shared by the C API and (through it) the CLI. Each writes
// its outputs under out_dir and throws shel::Error subclasses on failure;
// partially computed results stay on disk.

void fit(const RunConfig& cfg, const std::string& out_dir,
         std::string* summary_text = nullptr, ChainOutput* chain_out = nullptr);
void loo(const RunConfig& cfg, const std::string& out_dir);
void simulate(const RunConfig& cfg, const std::string& out_dir);
void basis(const RunConfig& cfg, const std::string& out_dir);

}  // namespace shel::cmd
