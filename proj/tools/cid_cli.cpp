// Command-line front end: solve / sweep / certify / compare on a TOML config.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cid/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Conformal constraint solver on S^1 x S^2"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cid::kVersion);

  std::string config;
  std::string out;
  bool strict = false;

  struct Command {
    const char* name;
    const char* help;
    std::optional<cid::Mode> mode;
  };
  const Command commands[] = {
      {"solve", "Run the mode named in the config", std::nullopt},
      {"sweep", "Parameter sweep over sweep.values", cid::Mode::sweep},
      {"certify", "Coupled solve plus bound-chain and lower-bound audits", cid::Mode::certify},
      {"compare", "Continuation vs. coupled fixed point on the same seed", cid::Mode::compare},
  };
  std::optional<cid::Mode> chosen;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config, "TOML config file")->required();
    sub->add_flag("--strict", strict, "Treat advisory checks as asserted");
    sub->add_option("--out", out, "Output directory (overrides output.dir)");
    sub->callback([&chosen, mode = c.mode] { chosen = mode; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::optional<std::string> out_dir = out.empty() ? std::nullopt : std::optional<std::string>(out);
  return cid::execute(config, chosen, strict, out_dir, std::cout);
}
