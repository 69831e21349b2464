#include "elm/cli/run.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "elm/common/digest.hpp"
#include "elm/common/error.hpp"

namespace elm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now(const char* fmt) {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, fmt);
    return s.str();
}

}  // namespace

std::string input_digest(const fs::path& path) {
    if (fs::is_regular_file(path)) return sha256_file(path);
    if (!fs::is_directory(path)) throw ValidationError("input not found: " + path.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += fs::relative(f, path).generic_string() + " " + sha256_file(f) + "\n";
    return sha256_hex(all);
}

std::string new_run_id(const std::string& command) {
    std::random_device rd;
    std::ostringstream s;
    s << command << '-' << utc_now("%Y%m%dT%H%M%SZ") << '-' << std::hex << std::setw(6) << std::setfill('0')
      << (rd() & 0xffffff);
    return s.str();
}

Run::Run(const AppConfig& cfg, std::string command, std::vector<std::string> argv, std::string run_id)
    : id_(run_id.empty() ? new_run_id(command) : std::move(run_id)),
      command_(std::move(command)),
      argv_(std::move(argv)),
      dir_(cfg.run_root / id_),
      started_at_(utc_now("%Y-%m-%dT%H:%M:%SZ")) {
    if (fs::exists(dir_ / "manifest.json")) throw ValidationError("run directory already used: " + dir_.string());
    fs::create_directories(dir_ / "logs");
    fs::create_directories(dir_ / "outputs");
    const std::string resolved = redact_secrets(cfg.resolved).dump(2);
    config_digest_ = sha256_hex(redact_secrets(cfg.resolved).dump());
    std::ofstream(dir_ / "config.resolved") << resolved << '\n';
    log_.open(dir_ / "logs" / "run.log", std::ios::app);
}

void Run::add_input(const fs::path& path) { inputs_[fs::absolute(path).string()] = input_digest(path); }

fs::path Run::output(const fs::path& path, const std::string& default_name) {
    const fs::path p = path.empty() ? outputs() / default_name : path;
    const std::string abs = fs::absolute(p).lexically_normal().string();
    if (std::find(outputs_.begin(), outputs_.end(), abs) == outputs_.end()) outputs_.push_back(abs);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
}

void Run::log(const std::string& message) {
    const std::string line = "[" + utc_now("%H:%M:%S") + "] " + message;
    std::cerr << line << '\n';
    if (log_) log_ << line << '\n' << std::flush;
}

void Run::finish(int exit_code, const std::string& error) {
    json m{{"run_id", id_},
           {"command", command_},
           {"argv", argv_},
           {"config_digest", config_digest_},
           {"input_digests", inputs_},
           {"started_at", started_at_},
           {"finished_at", utc_now("%Y-%m-%dT%H:%M:%SZ")},
           {"outputs", outputs_},
           {"tool_version", kToolVersion},
           {"exit_code", exit_code},
           {"status", exit_code == 0 ? "ok" : "failed"}};
    if (!error.empty()) m["error"] = error;
    std::ofstream(dir_ / "manifest.json") << m.dump(2) << '\n';
}

}  // namespace elm::cli
