#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "elm/cli/config.hpp"

namespace elm::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Digest of a file, or of a directory's files in path order.
std::string input_digest(const std::filesystem::path& path);

// UTC timestamp plus random suffix.
std::string new_run_id(const std::string& command);

// One CLI invocation: runs/<id>/{manifest.json, config.resolved, logs/, outputs/}.
class Run {
public:
    Run(const AppConfig& cfg, std::string command, std::vector<std::string> argv, std::string run_id = {});

    const std::string& id() const { return id_; }
    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path outputs() const { return dir_ / "outputs"; }

    void add_input(const std::filesystem::path& path);
    // Registers and returns `path`, or outputs()/default_name when empty.
    std::filesystem::path output(const std::filesystem::path& path, const std::string& default_name);
    void log(const std::string& message);

    // Writes manifest.json; called once with the final exit code.
    void finish(int exit_code, const std::string& error = {});

    std::string config_digest() const { return config_digest_; }

private:
    std::string id_;
    std::string command_;
    std::vector<std::string> argv_;
    std::filesystem::path dir_;
    std::string config_digest_;
    std::string started_at_;
    std::map<std::string, std::string> inputs_;
    std::vector<std::string> outputs_;
    std::ofstream log_;
};

}  // namespace elm::cli
