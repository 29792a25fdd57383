#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "reldepth/error.hpp"

namespace reldepth::cli {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_parent(const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relative depth supervision and temporal consistency toolkit", "reldepth"};
  app.require_subcommand(1);
  std::vector<Command> cmds;
  add_synth(app, cmds);
  add_mask(app, cmds);
  add_disparity(app, cmds);
  add_warp(app, cmds);
  add_eval_ssimae(app, cmds);
  add_eval_temporal(app, cmds);
  add_train(app, cmds);
  add_gradcheck(app, cmds);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    for (const auto* sub : app.get_subcommands())
      if (sub) err << sub->help();
    return kInvalid;
  }

  for (auto& cmd : cmds) {
    if (!cmd.app->parsed()) continue;
    try {
      return cmd.action(out, err);
    } catch (const NumericalError& e) {
      err << "numerical failure: " << e.what() << '\n';
      return kNumerical;
    } catch (const DegenerateError& e) {
      err << "degenerate input: " << e.what() << '\n';
      return kNumerical;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kInvalid;
    }
  }
  err << "error: no subcommand given\n";
  return kInvalid;
}

}  // namespace reldepth::cli
