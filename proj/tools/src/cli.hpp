#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace reldepth::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kNumerical = 2 };

// argv without the program name. Never throws; errors go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Each subcommand registers its options on sub and returns the action run
// after a successful parse.
struct Command {
  CLI::App* app = nullptr;
  std::function<int(std::ostream& out, std::ostream& err)> action;
};

void add_synth(CLI::App& root, std::vector<Command>& cmds);
void add_mask(CLI::App& root, std::vector<Command>& cmds);
void add_disparity(CLI::App& root, std::vector<Command>& cmds);
void add_warp(CLI::App& root, std::vector<Command>& cmds);
void add_eval_ssimae(CLI::App& root, std::vector<Command>& cmds);
void add_eval_temporal(CLI::App& root, std::vector<Command>& cmds);
void add_train(CLI::App& root, std::vector<Command>& cmds);
void add_gradcheck(CLI::App& root, std::vector<Command>& cmds);

// %.17g
std::string fmt(double v);
void ensure_parent(const std::filesystem::path& path);

}  // namespace reldepth::cli
