// geneval: command-line front end for the experiments.
//
//   geneval <experiment> [--config FILE] [--seed N] [--threads N] [--out DIR]
//                        [--set key=value]... [--gnuplot]
//   geneval fetch-info [--dir DIR]

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "geneval/experiments.hpp"

namespace {

struct DatasetFile {
    const char* name;
    const char* url;
    const char* md5;  // published checksum of the archive, empty if none
};

const std::vector<DatasetFile> kDatasetFiles = {
    {"train-images-idx3-ubyte.gz", "http://yann.lecun.com/exdb/mnist/train-images-idx3-ubyte.gz",
     "f68b3c2dcbeaaa9fbdd348bbdeb94873"},
    {"train-labels-idx1-ubyte.gz", "http://yann.lecun.com/exdb/mnist/train-labels-idx1-ubyte.gz",
     "d53e105ee54ea40749a09fcbcd1e9432"},
    {"t10k-images-idx3-ubyte.gz", "http://yann.lecun.com/exdb/mnist/t10k-images-idx3-ubyte.gz",
     "9fb629c4189551a2d022fa330f9573f3"},
    {"t10k-labels-idx1-ubyte.gz", "http://yann.lecun.com/exdb/mnist/t10k-labels-idx1-ubyte.gz",
     "ec29112dd5afa0611ce80d1b7f02629c"},
    {"cifar-10-binary.tar.gz", "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz",
     "c32a1d4ab5d03f1284b67883e8d87530"},
    {"train-images-idx3-ubyte", "", ""},
    {"t10k-images-idx3-ubyte", "", ""},
    {"data_batch_1.bin", "", ""},
    {"data_batch_2.bin", "", ""},
    {"data_batch_3.bin", "", ""},
    {"data_batch_4.bin", "", ""},
    {"data_batch_5.bin", "", ""},
    {"test_batch.bin", "", ""},
};

std::string file_digest(const std::string& path, const EVP_MD* md) {
    std::ifstream in(path, std::ios::binary);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, md, nullptr);
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx, out, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char byte[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof byte, "%02x", out[i]);
        hex += byte;
    }
    return hex;
}

int fetch_info(const std::string& dir) {
    std::cout << "Download the archives below and extract them; geneval never downloads.\n";
    for (const auto& f : kDatasetFiles) {
        if (*f.url) {
            std::cout << "  " << f.url << "  md5 " << f.md5 << "\n";
        }
    }
    if (dir.empty()) {
        return 0;
    }
    int status = 0;
    for (const auto& f : kDatasetFiles) {
        const auto path = (std::filesystem::path(dir) / f.name).string();
        if (!std::filesystem::exists(path)) {
            continue;
        }
        std::cout << path << "\n  sha256 " << file_digest(path, EVP_sha256()) << "\n";
        if (*f.md5) {
            const std::string md5 = file_digest(path, EVP_md5());
            const bool ok = md5 == f.md5;
            std::cout << "  md5    " << md5 << (ok ? "  OK" : "  MISMATCH") << "\n";
            status = ok ? status : 1;
        } else {
            std::cout << "  (no published checksum for the extracted file)\n";
        }
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evaluation procedures for generative models"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    bool gnuplot = false;

    for (const auto& name : geneval::experiment_names()) {
        auto* sub = app.add_subcommand(name, "Run the " + name + " experiment");
        sub->add_option("--config", config_path, "Config file (key = value lines)")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Seed, overrides the config");
        sub->add_option("--threads", threads, "Thread cap (0 = hardware concurrency)");
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--set", overrides, "Override a config key: key=value");
        sub->add_flag("--gnuplot", gnuplot, "Also write whitespace-separated .dat files");
    }
    std::string data_dir;
    auto* fetch = app.add_subcommand("fetch-info", "Print dataset URLs and verify checksums of local files");
    fetch->add_option("--dir", data_dir, "Directory holding downloaded files")->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (fetch->parsed()) {
            return fetch_info(data_dir);
        }
        const std::string name = app.get_subcommands().front()->get_name();
        auto config = config_path.empty() ? geneval::KeyValueConfig() : geneval::KeyValueConfig::load(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            geneval::require(eq != std::string::npos && eq > 0, "--set expects key=value, got '" + kv + "'");
            config.set(geneval::detail::trim(kv.substr(0, eq)), geneval::detail::trim(kv.substr(eq + 1)));
        }
        if (app.get_subcommands().front()->count("--seed")) {
            config.set("seed", std::to_string(seed));
        }
        geneval::set_max_threads(threads);
        const auto summary = geneval::run_experiment(name, config, {out_dir, gnuplot});
        for (const auto& f : summary.files) {
            std::cout << f << "\n";
        }
        std::fprintf(stderr, "%s finished in %.1f s\n", name.c_str(), summary.wall_seconds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
