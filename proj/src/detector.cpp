#include "ppdeid/eval/detector.hpp"

#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "ppdeid/core/error.hpp"
#include "ppdeid/core/rng.hpp"

namespace ppdeid {

GrayImage shuffle_patches(const GrayImage& img, int block, uint64_t seed) {
    const int by = img.h / block, bx = img.w / block;
    std::vector<int> perm(static_cast<size_t>(by) * bx);
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    Rng rng(derive_seed(seed, 0x70617463ULL));
    rng.shuffle(perm);
    GrayImage out(img.h, img.w);
    for (int t = 0; t < by * bx; ++t) {
        const int sy = (perm[t] / bx) * block, sx = (perm[t] % bx) * block;
        const int dy = (t / bx) * block, dx = (t % bx) * block;
        for (int y = 0; y < block; ++y)
            for (int x = 0; x < block; ++x) out.at(dy + y, dx + x) = img.at(sy + y, sx + x);
    }
    return out;
}

std::unique_ptr<BuiltinDetector> BuiltinDetector::train(const std::vector<GrayImage>& faces,
                                                        uint64_t seed) {
    if (faces.empty()) raise("evaluation", "AdapterFailure", "no faces to train the detector on");
    auto detector = std::make_unique<BuiltinDetector>();
    detector->net_ = SmallCnn(2, derive_seed(seed, 0x64657463ULL));

    Rng rng(derive_seed(seed, 0x64617461ULL));
    std::vector<GrayImage> pool;
    std::vector<int> labels;
    for (const auto& f : faces) {
        pool.push_back(f);
        labels.push_back(1);
        // padded positives so the detector tolerates the padding protocol
        pool.push_back(pad_image(f, rng.range_int(10, 61)));
        labels.push_back(1);
        pool.push_back(shuffle_patches(f, 32, rng.next_u64()));
        labels.push_back(0);
    }
    // structureless negatives
    for (int i = 0; i < static_cast<int>(faces.size()); ++i) {
        GrayImage noise(kFaceSize, kFaceSize);
        for (auto& v : noise.v) v = static_cast<float>(rng.uniform());
        pool.push_back(noise);
        labels.push_back(0);
        GrayImage flat(kFaceSize, kFaceSize);
        const float level = static_cast<float>(rng.uniform());
        for (auto& v : flat.v) v = level;
        pool.push_back(flat);
        labels.push_back(0);
    }

    std::vector<const GrayImage*> ptrs;
    for (const auto& img : pool) ptrs.push_back(&img);
    detector->net_.fit(ptrs, labels, 300, 16, 1e-3, derive_seed(seed, 0x73746570ULL));
    return detector;
}

bool BuiltinDetector::detect(const GrayImage& image) { return net_.predict(image) == 1; }

ProcessDetector::ProcessDetector(std::string executable, std::string scratch_dir)
    : executable_(std::move(executable)), scratch_dir_(std::move(scratch_dir)) {
    if (scratch_dir_.empty())
        scratch_dir_ = (std::filesystem::temp_directory_path() / "ppdeid_detector").string();
    std::filesystem::create_directories(scratch_dir_);
}

bool ProcessDetector::detect(const GrayImage& image) {
    const std::string path =
        (std::filesystem::path(scratch_dir_) / ("probe_" + std::to_string(counter_++) + ".png"))
            .string();
    write_gray_image(image, path);
    const std::string cmd = executable_ + " '" + path + "' 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) raise("evaluation", "AdapterFailure", "cannot launch detector: " + executable_);
    char buf[512];
    std::string output;
    while (fgets(buf, sizeof(buf), pipe)) output += buf;
    const int status = pclose(pipe);
    std::filesystem::remove(path);

    auto brace = output.find('{');
    if (brace != std::string::npos) {
        try {
            auto parsed = nlohmann::json::parse(output.substr(brace));
            if (parsed.contains("face")) return parsed["face"].get<bool>();
        } catch (...) {
            // fall through to exit-status verdict
        }
    }
    if (status == -1) raise("evaluation", "AdapterFailure", "detector process failed");
    return WEXITSTATUS(status) == 0;
}

} // namespace ppdeid
