#include "multibal/datagen.hpp"
#include "multibal/dataset.hpp"
#include "multibal/errors.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace multibal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    const fs::path dir = fs::temp_directory_path() / "multibal_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path &p, const std::string &text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST(DatasetCsv, RoundTripIsBitExact) {
    GenHardParams p;
    p.n = 120;
    p.seed = 4;
    const Dataset ds = gen_hard(p);
    const auto path = scratch("hard.csv");
    write_dataset_csv(ds, path.string());
    const Dataset back = read_dataset_csv(path.string());
    EXPECT_EQ(back.x, ds.x);
    EXPECT_EQ(back.t, ds.t);
    EXPECT_EQ(back.y, ds.y);
    ASSERT_TRUE(back.truth.has_value());
    EXPECT_EQ(*back.truth, *ds.truth);
    EXPECT_EQ(back.arms, ds.arms);
}

TEST(DatasetCsv, HeaderIsCommentedAndNamed) {
    GenTopologyParams p;
    p.n = 10;
    const auto path = scratch("tree.csv");
    write_dataset_csv(gen_topology(p).first, path.string());
    std::ifstream in(path);
    std::string first, second;
    std::getline(in, first);
    std::getline(in, second);
    EXPECT_EQ(first, "# columns: x0,x1,x2,x3,t,y,mu0,mu1,mu2,mu3,mu4,mu5,mu6");
    EXPECT_EQ(second, "x0,x1,x2,x3,t,y,mu0,mu1,mu2,mu3,mu4,mu5,mu6");
}

TEST(DatasetCsv, WithoutTruthUsesHintOrMaxArm) {
    const auto path = scratch("plain.csv");
    write_text(path, "x0,t,y\n0.5,0,1\n1.5,2,3\n");
    const Dataset a = read_dataset_csv(path.string());
    EXPECT_EQ(a.arms, 3);
    EXPECT_FALSE(a.truth.has_value());
    EXPECT_EQ(read_dataset_csv(path.string(), 5).arms, 5);
}

TEST(DatasetCsv, MalformedInputsAreIoErrors) {
    const auto missing = scratch("does_not_exist.csv");
    fs::remove(missing);
    try {
        read_dataset_csv(missing.string());
        FAIL();
    } catch (const Error &e) { EXPECT_EQ(e.kind(), ErrorKind::io); }
    const auto ragged = scratch("ragged.csv");
    write_text(ragged, "x0,t,y\n0.5,0\n");
    EXPECT_THROW(read_dataset_csv(ragged.string()), Error);
    const auto bad_header = scratch("bad_header.csv");
    write_text(bad_header, "a,b,c\n1,0,1\n");
    EXPECT_THROW(read_dataset_csv(bad_header.string()), Error);
    const auto bad_arm = scratch("bad_arm.csv");
    write_text(bad_arm, "x0,t,y\n0.5,1.5,1\n");
    EXPECT_THROW(read_dataset_csv(bad_arm.string()), Error);
}

TEST(Provenance, RoundTrip) {
    GenDoseParams p;
    p.n = 30;
    p.seed = 99;
    const Dataset ds = gen_dose(p);
    const auto path = scratch("dose.json");
    write_provenance_json(ds, path.string());
    const Provenance back = read_provenance_json(path.string());
    EXPECT_EQ(back.generator, "dose");
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.params, ds.provenance.params);
}

TEST(DatasetShape, SubsetAndChecks) {
    Dataset ds;
    ds.arms = 2;
    ds.x = Matrix::Zero(3, 1);
    ds.y = Vector::Zero(3);
    ds.t = {0, 1, 1};
    ds.check_shapes();
    const Dataset s = ds.subset({2, 0});
    EXPECT_EQ(s.t, (std::vector<int>{1, 0}));
    ds.t = {0, 1, 2};
    EXPECT_THROW(ds.check_shapes(), Error);
}
