#pragma once

// Shared test scaffolding: throwaway directories, file helpers, stdout
// capture for command functions that print summaries, and a runner for the
// installed CLI binary.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace testutil {

namespace fs = std::filesystem;

// Fresh directory under the system temp root, removed when the object dies.
struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("rankforge_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    fs::path file(const std::string& name) const { return path / name; }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
};

inline void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Diverts std::cout into a buffer for the lifetime of the object; the
// pipeline commands print one-line summaries that would clutter test output.
struct CoutCapture {
    CoutCapture() : old_(std::cout.rdbuf(buffer_.rdbuf())) {}
    ~CoutCapture() { std::cout.rdbuf(old_); }
    CoutCapture(const CoutCapture&) = delete;
    CoutCapture& operator=(const CoutCapture&) = delete;

    std::string text() const { return buffer_.str(); }

private:
    std::ostringstream buffer_;
    std::streambuf* old_;
};

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

#ifdef RANKFORGE_CLI_PATH
// Runs the rankforge binary with the given argument string.
inline CliResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path out_path = scratch / "cli_stdout.txt";
    const fs::path err_path = scratch / "cli_stderr.txt";
    const std::string cmd = std::string(RANKFORGE_CLI_PATH) + " " + args + " >" +
                            out_path.string() + " 2>" + err_path.string();
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    return result;
}
#endif

}  // namespace testutil
