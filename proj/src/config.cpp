#include "ppdeid/train/config.hpp"

#include <map>
#include <sstream>

#include "ppdeid/core/error.hpp"
#include "ppdeid/core/hash.hpp"

#include <fstream>

namespace ppdeid {

namespace {
constexpr const char* kModule = "training";

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
} // namespace

const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::cgan_only: return "cgan_only";
        case Ablation::cgan_sim: return "cgan_sim";
        case Ablation::cgan_verif: return "cgan_verif";
        default: return "cgan_sim_verif";
    }
}

Ablation parse_ablation(const std::string& s) {
    if (s == "cgan_only") return Ablation::cgan_only;
    if (s == "cgan_sim") return Ablation::cgan_sim;
    if (s == "cgan_verif") return Ablation::cgan_verif;
    if (s == "cgan_sim_verif") return Ablation::cgan_sim_verif;
    raise(kModule, "InvalidConfig", "unknown ablation '" + s + "'");
}

std::string TrainConfig::serialize() const {
    std::ostringstream out;
    out.precision(17);
    out << "lambda1 = " << lambda1 << "\n";
    out << "lambda2 = " << lambda2 << "\n";
    out << "margin = " << margin << "\n";
    out << "lr_system = " << lr_system << "\n";
    out << "lr_pretrain = " << lr_pretrain << "\n";
    out << "batch_size = " << batch_size << "\n";
    out << "epochs = " << epochs << "\n";
    out << "pretrain_epochs = " << pretrain_epochs << "\n";
    out << "seed = " << seed << "\n";
    out << "ablation = " << to_string(ablation) << "\n";
    out << "adam_beta1 = " << adam_beta1 << "\n";
    out << "adam_beta2 = " << adam_beta2 << "\n";
    out << "gen_width = " << gen_width << "\n";
    out << "disc_width = " << disc_width << "\n";
    out << "verif_width = " << verif_width << "\n";
    out << "checkpoint_interval = " << checkpoint_interval << "\n";
    return out.str();
}

uint64_t TrainConfig::hash() const { return fnv1a64(serialize()); }

TrainConfig TrainConfig::parse(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            raise(kModule, "InvalidConfig", "line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "lambda1") cfg.lambda1 = std::stod(value);
            else if (key == "lambda2") cfg.lambda2 = std::stod(value);
            else if (key == "margin") cfg.margin = std::stod(value);
            else if (key == "lr_system") cfg.lr_system = std::stod(value);
            else if (key == "lr_pretrain") cfg.lr_pretrain = std::stod(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "pretrain_epochs") cfg.pretrain_epochs = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "ablation") cfg.ablation = parse_ablation(value);
            else if (key == "adam_beta1") cfg.adam_beta1 = std::stod(value);
            else if (key == "adam_beta2") cfg.adam_beta2 = std::stod(value);
            else if (key == "gen_width") cfg.gen_width = std::stod(value);
            else if (key == "disc_width") cfg.disc_width = std::stod(value);
            else if (key == "verif_width") cfg.verif_width = std::stod(value);
            else if (key == "checkpoint_interval") cfg.checkpoint_interval = std::stoi(value);
            else raise(kModule, "InvalidConfig", "unknown key '" + key + "'");
        } catch (const Error&) {
            throw;
        } catch (...) {
            raise(kModule, "InvalidConfig", "bad value for '" + key + "': " + value);
        }
    }
    if (cfg.lambda1 < 0 || cfg.lambda2 < 0)
        raise(kModule, "InvalidConfig", "lambda weights must be non-negative");
    if (cfg.margin <= 0) raise(kModule, "InvalidConfig", "margin must be positive");
    if (cfg.batch_size < 1) raise(kModule, "InvalidConfig", "batch_size must be >= 1");
    return cfg;
}

TrainConfig TrainConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(kModule, "MissingFile", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

} // namespace ppdeid
