// stgn <gen-data|pretrain-encoder|train|sample|eval|gradcheck> --config PATH [--key value]...
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <iostream>
#include <string>
#include <vector>

#include "stgn/config.hpp"
#include "stgn/error.hpp"
#include "stgn/pipeline.hpp"

namespace {

int usage(const std::string& msg) {
    if (!msg.empty()) std::cerr << "error: " << msg << "\n";
    std::cerr << "usage: stgn <gen-data|pretrain-encoder|train|sample|eval|gradcheck>"
                 " --config PATH [--key value]...\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) return usage("missing command");
    const std::string cmd = argv[1];

    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    for (int i = 2; i < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag.rfind("--", 0) != 0) return usage("expected --key, got " + flag);
        if (i + 1 >= argc) return usage("missing value for " + flag);
        const std::string key = flag.substr(2);
        if (key == "config") {
            config_path = argv[i + 1];
        } else {
            overrides.emplace_back(key, argv[i + 1]);
        }
    }
    if (config_path.empty()) return usage("--config is required");

    try {
        stgn::RunConfig cfg = stgn::load_config(config_path, overrides);
        if (cmd == "gen-data") {
            stgn::pipeline::cmd_gen_data(cfg);
        } else if (cmd == "pretrain-encoder") {
            stgn::pipeline::cmd_pretrain_encoder(cfg);
        } else if (cmd == "train") {
            stgn::pipeline::cmd_train(cfg);
        } else if (cmd == "sample") {
            stgn::pipeline::cmd_sample(cfg);
        } else if (cmd == "eval") {
            stgn::pipeline::cmd_eval(cfg);
        } else if (cmd == "gradcheck") {
            if (!stgn::pipeline::cmd_gradcheck(cfg)) return 2;
        } else {
            return usage("unknown command " + cmd);
        }
    } catch (const stgn::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
