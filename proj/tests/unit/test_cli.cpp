#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "permucate_unit_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(PERMUCATE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string path(const std::string& name) { return (work_dir() / name).string(); }

void write(const std::string& name, const std::string& text) { std::ofstream(work_dir() / name) << text; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("successful subcommands exit 0") {
  CHECK(run("simulate -n 300 --seed 3 -o " + path("ld.csv")) == 0);
  CHECK(fs::exists(path("ld.csv")));
  CHECK(run("simulate --dgp HL -d 8 --d-imp 3 -n 200 -o " + path("hl.csv")) == 0);
  CHECK(run("fit " + path("ld.csv")) == 0);
  CHECK(run("importance " + path("ld.csv") + " --seeds 1 --permutations 3 -o " + path("imp.csv")) == 0);
  CHECK(run("plot " + path("imp.csv") + " -o " + path("imp.svg")) == 0);
  CHECK(fs::exists(path("imp.svg")));
  write("tiny.cfg", "n_grid = 200\nn_seeds = 1\nn_permutations = 2\noutput_dir = " + path("bench") + "\n");
  CHECK(run("bench -q --seed 5 " + path("tiny.cfg")) == 0);
  std::ifstream manifest(work_dir() / "bench" / "manifest.json");
  const std::string text((std::istreambuf_iterator<char>(manifest)), std::istreambuf_iterator<char>());
  CHECK(text.find("\"master_seed\": 5") != std::string::npos);
  CHECK(run("--version") == 0);
}

TEST_CASE("configuration problems exit 2") {
  write("alpha.cfg", "alpha = 1.5\n");
  write("unknown.cfg", "colour = blue\n");
  CHECK(run("bench -q " + path("alpha.cfg")) == 2);
  CHECK(run("bench -q " + path("unknown.cfg")) == 2);
  CHECK(run("bench -q " + path("missing.cfg")) == 2);
  CHECK(run("--bogus") == 2);
  CHECK(run("") == 2);
  CHECK(run("simulate --dgp XX") == 2);
  CHECK(run("simulate -n 0") == 2);
  CHECK(run("importance " + path("ld.csv") + " --method shap") == 2);
  CHECK(run("bench -q " + path("tiny.cfg"), "PERMUCATE_WORKERS=abc") == 2);
}

TEST_CASE("data problems exit 3") {
  write("bad_header.csv", "a,b,c\n1,2,3\n");
  write("bad_value.csv", "x1,a,y\n1,0,2\n1,5,3\n");
  CHECK(run("fit " + path("bad_header.csv")) == 3);
  CHECK(run("fit " + path("bad_value.csv")) == 3);
  CHECK(run("fit " + path("does_not_exist.csv")) == 3);
  CHECK(run("plot " + path("ld.csv")) == 3);
}

TEST_CASE("numeric failures exit 4") {
  // Outcomes this large overflow the squared-error sums.
  std::string text = "x1,x2,a,y\n";
  for (int i = 0; i < 60; ++i)
    text += std::to_string(i % 7) + "," + std::to_string((i * 3) % 5) + "," + std::to_string(i % 2) + "," +
            (i % 3 ? "1e300" : "-1e300") + "\n";
  write("huge.csv", text);
  CHECK(run("fit " + path("huge.csv")) == 4);
}

}  // TEST_SUITE
