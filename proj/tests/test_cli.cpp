#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "bico_cli_stdout.txt";
    const std::string cmd = std::string(BICO_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

// Last JSON object printed on stdout.
nlohmann::json last_json(const std::string& out) {
    const auto pos = out.find('{');
    REQUIRE(pos != std::string::npos);
    return nlohmann::json::parse(out.substr(pos, out.rfind('}') - pos + 1));
}

}  // namespace

TEST_CASE("cli exit codes and end-to-end flow") {
    const fs::path dir = fs::temp_directory_path() / "bico_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = dir.string();

    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("train --subtask ideology --bogus").code == 2);
    CHECK(run("--help").code == 0);

    REQUIRE(run("synth --n 6 --dim 8 --sigma 0.05 --seed 3 --out " + d + "/data").code == 0);
    CHECK(fs::exists(dir / "data" / "manifest.jsonl"));
    CHECK(fs::exists(dir / "data" / "embeddings.bin"));
    const std::string data = " --manifest " + d + "/data/manifest.jsonl --embeddings " + d + "/data/embeddings.bin";

    const Run tr = run("train --subtask ideology --epochs 2 --hidden 8 --lr 0.01" + data + " --out " + d + "/run");
    REQUIRE(tr.code == 0);
    CHECK(fs::exists(dir / "run" / "params.json"));
    CHECK(fs::exists(dir / "run" / "metrics.json"));
    CHECK(fs::exists(dir / "run" / "log.jsonl"));
    const auto j = last_json(tr.out);
    CHECK(j.contains("micro_acc"));
    CHECK(j["config"]["iters"] == 2);

    // same seed, same output
    const Run again = run("train --subtask ideology --epochs 2 --hidden 8 --lr 0.01" + data + " --out " + d + "/run2");
    CHECK(again.out == tr.out);

    CHECK(run("eval" + data + " --params " + d + "/run/params.json").code == 0);
    CHECK(run("export-reps" + data + " --params " + d + "/run/params.json --facet EP --out " + d + "/reps/ep").code == 0);
    CHECK(fs::exists(dir / "reps" / "ep.bin"));
    CHECK(run("export-reps" + data + " --params " + d + "/run/params.json --facet XX --out " + d + "/reps/xx").code ==
          3);

    CHECK(run("train --subtask ideology --epochs 1 --hidden 8 --disable-diffusion --disable-aggregation" + data).code ==
          0);
    const Run rel = run("train --subtask relevance --epochs 1 --hidden 8" + data);
    REQUIRE(rel.code == 0);
    const auto rc = last_json(rel.out)["config"];
    CHECK(rc["iters"] == 4);
    CHECK(rc["tau"] == 0.5);
    CHECK(rc["lambda"] == 0.3);
    CHECK(rc["batch_size"] == 64);
    CHECK(rc["lr"] == 2e-5);

    CHECK(run("train --subtask ideology --tau 0" + data).code == 2);
    CHECK(run("train --subtask relevance --manifest /nonexistent.jsonl --embeddings " + d + "/data/embeddings.bin")
              .code == 3);
    std::ofstream(dir / "bad.jsonl") << "{not json\n";
    CHECK(run("train --subtask relevance --manifest " + d + "/bad.jsonl --embeddings " + d + "/data/embeddings.bin")
              .code == 3);

    const Run gc = run("gradcheck --subtask ideology");
    CHECK(gc.code == 0);
    CHECK(gc.out.find("PASS") != std::string::npos);
    CHECK(run("gradcheck --subtask ideology --tol 1e-300").code == 4);

    fs::remove_all(dir);
}
