#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "bcnet/commands.hpp"

namespace {

enum exit_code { ok = 0, failure = 1, bad_config = 2, bad_data = 3, numeric_failure = 4 };

// Turns trailing "--key value" / "--key=value" pairs into config entries.
bcnet::config_entries parse_overrides(const std::vector<std::string>& args) {
  bcnet::config_entries out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) {
      throw bcnet::config_error("unexpected argument '" + a + "'");
    }
    std::string key = a.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else if (i + 1 < args.size()) {
      value = args[++i];
    } else {
      throw bcnet::config_error("flag --" + key + " needs a value");
    }
    std::replace(key.begin(), key.end(), '-', '_');
    out[key] = value;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal action proposal generation: synth, train, infer, eval"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::vector<std::string> rest;
  const std::pair<const char*, const char*> commands[] = {
      {"synth", "write a synthetic dataset to <output>"},
      {"train", "train a model and write <checkpoint>"},
      {"infer", "write <output>/proposals.{json,csv} from <checkpoint>"},
      {"eval", "score proposals against <annotations>"}};
  for (const auto& [name, about] : commands) {
    auto* sub = app.add_subcommand(name, about);
    sub->footer("Any config key can be given as --key value.");
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->allow_extras();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : bad_config;
  }
  auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  try {
    const auto config = bcnet::load_run_config(config_path, parse_overrides(sub->remaining()));
    if (command == "synth") bcnet::cmd_synth(config);
    else if (command == "train") bcnet::cmd_train(config);
    else if (command == "infer") bcnet::cmd_infer(config);
    else bcnet::cmd_eval(config);
  } catch (const bcnet::config_error& e) {
    bcnet::logging::error(e.what());
    return bad_config;
  } catch (const bcnet::numeric_error& e) {
    bcnet::logging::error(e.what());
    return numeric_failure;
  } catch (const bcnet::data_error& e) {
    bcnet::logging::error(e.what());
    return bad_data;
  } catch (const bcnet::dimension_error& e) {
    bcnet::logging::error(e.what());
    return bad_data;
  } catch (const std::exception& e) {
    bcnet::logging::error(e.what());
    return failure;
  }
  return ok;
}
