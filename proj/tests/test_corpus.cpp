#include <catch2/catch_amalgamated.hpp>

#include "cequel/corpus.hpp"
#include "cequel/errors.hpp"
#include "support.hpp"

using namespace cequel;
using testsupport::TempDir;

TEST_CASE("whitespace tokenizer counts runs of non-space and floors at one") {
    CHECK(whitespace_token_count("alpha beta") == 2);
    CHECK(whitespace_token_count("  padded\t words \n here ") == 3);
    CHECK(whitespace_token_count("single") == 1);
    CHECK(whitespace_token_count("") == 1);
    CHECK(whitespace_token_count("   ") == 1);
}

TEST_CASE("worked corpus degrees and inverse-degree sum") {
    auto corpus = testsupport::worked_corpus();
    auto deg = compute_degrees(corpus.embeddings);
    REQUIRE(deg.size() == 3);
    CHECK(deg.degrees[0] == Catch::Approx(1.6).epsilon(1e-12));
    CHECK(deg.degrees[1] == Catch::Approx(1.8).epsilon(1e-12));
    CHECK(deg.degrees[2] == Catch::Approx(2.4).epsilon(1e-12));
    CHECK(deg.inv_degree_sum == Catch::Approx(1.5972222222222222).epsilon(1e-12));
    CHECK(deg.degree_sum == Catch::Approx(5.8).epsilon(1e-12));
    CHECK(ess(corpus.embeddings, 0, 2) == Catch::Approx(0.6).epsilon(1e-12));
    CHECK(ess(corpus.embeddings, 1, 2) == Catch::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("degrees are clamped away from zero") {
    Eigen::MatrixXd emb(2, 2);
    emb << 1.0, 0.0, -1.0, 0.0;
    auto deg = compute_degrees(emb);
    CHECK(deg.raw_degrees[0] == Catch::Approx(0.0).margin(1e-15));
    CHECK(deg.degrees[0] == DegreeProfile::kEps);
    CHECK(deg.degrees[1] == DegreeProfile::kEps);
}

TEST_CASE("corpus loader reads records and applies token overrides") {
    TempDir dir;
    auto path = dir.file("corpus.jsonl");
    {
        JsonlWriter out(path);
        out.write({{"id", 1}, {"text", "b b b"}, {"label", 7}});
        out.write({{"id", 0}, {"text", "a"}, {"label", "news"}, {"tokens", 11}});
        out.close();
    }
    auto corpus = load_corpus(path);
    REQUIRE(corpus.size() == 2);
    CHECK(corpus.instances[0].id == 0);
    CHECK(corpus.instances[0].token_count == 11);
    CHECK(corpus.instances[1].token_count == 3);
    CHECK(*corpus.instances[0].label == "news");
    CHECK(*corpus.instances[1].label == "7");
    CHECK(corpus.file_order == std::vector<int>{1, 0});
    CHECK(corpus.total_tokens() == 14);
    CHECK(corpus.mean_tokens() == Catch::Approx(7.0));
    CHECK(corpus.has_labels());
    auto ids = corpus.label_ids();
    CHECK(ids == std::vector<int>{0, 1});
}

TEST_CASE("corpus loader rejects malformed input with line numbers") {
    TempDir dir;

    SECTION("malformed JSON") {
        auto path = dir.file("bad.jsonl");
        std::ofstream(path) << "{\"id\":0,\"text\":\"x\"}\nnot json\n";
        try {
            load_corpus(path);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }

    SECTION("missing text") {
        auto path = dir.file("missing.jsonl");
        std::ofstream(path) << "{\"id\":0}\n";
        CHECK_THROWS_AS(load_corpus(path), ValidationError);
    }

    SECTION("duplicate id") {
        auto path = dir.file("dup.jsonl");
        std::ofstream(path) << "{\"id\":0,\"text\":\"x\"}\n{\"id\":0,\"text\":\"y\"}\n";
        CHECK_THROWS_AS(load_corpus(path), ValidationError);
    }

    SECTION("non-dense ids") {
        auto path = dir.file("gap.jsonl");
        std::ofstream(path) << "{\"id\":0,\"text\":\"x\"}\n{\"id\":2,\"text\":\"y\"}\n";
        CHECK_THROWS_AS(load_corpus(path), ValidationError);
    }

    SECTION("negative token count") {
        auto path = dir.file("neg.jsonl");
        std::ofstream(path) << "{\"id\":0,\"text\":\"x\",\"tokens\":-1}\n";
        CHECK_THROWS_AS(load_corpus(path), ValidationError);
    }

    SECTION("empty corpus") {
        auto path = dir.file("empty.jsonl");
        std::ofstream(path) << "\n";
        CHECK_THROWS_AS(load_corpus(path), ValidationError);
    }
}

TEST_CASE("embedding matrices round-trip through binary and jsonl forms") {
    TempDir dir;
    Eigen::MatrixXd m(3, 4);
    m << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;

    SECTION("binary") {
        auto path = dir.file("emb.bin");
        write_matrix_binary(path, m);
        auto back = load_embeddings(path);
        REQUIRE(back.rows() == 3);
        REQUIRE(back.cols() == 4);
        CHECK((back - m).cwiseAbs().maxCoeff() < 1e-6);
    }

    SECTION("jsonl") {
        auto path = dir.file("emb.jsonl");
        {
            JsonlWriter out(path);
            for (int i = 0; i < 3; ++i) {
                json row = json::array();
                for (int j = 0; j < 4; ++j) row.push_back(m(i, j));
                out.write(row);
            }
            out.close();
        }
        auto back = load_embeddings(path);
        CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("jsonl with inconsistent widths is rejected") {
        auto path = dir.file("ragged.jsonl");
        std::ofstream(path) << "[1,2]\n[1,2,3]\n";
        CHECK_THROWS_AS(load_embeddings(path), ValidationError);
    }

    SECTION("truncated binary is rejected") {
        auto path = dir.file("trunc.bin");
        write_matrix_binary(path, m);
        auto bytes = testsupport::slurp(path);
        std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
        CHECK_THROWS_AS(load_embeddings(path), ValidationError);
    }
}

TEST_CASE("attach_embeddings maps file order to id order and normalizes rows") {
    TempDir dir;
    auto path = dir.file("corpus.jsonl");
    {
        JsonlWriter out(path);
        out.write({{"id", 2}, {"text", "c"}});
        out.write({{"id", 0}, {"text", "a"}});
        out.write({{"id", 1}, {"text", "b"}});
        out.close();
    }
    auto corpus = load_corpus(path);
    Eigen::MatrixXd emb(3, 2);
    // Rows follow file order: id 2, id 0, id 1.
    emb << 0.0, 2.0, 3.0, 0.0, 4.0, 4.0;
    attach_embeddings(corpus, emb);
    CHECK(corpus.embeddings(0, 0) == Catch::Approx(1.0));
    CHECK(corpus.embeddings(1, 0) == Catch::Approx(std::sqrt(0.5)));
    CHECK(corpus.embeddings(2, 1) == Catch::Approx(1.0));

    Eigen::MatrixXd wrong(2, 2);
    wrong.setOnes();
    CHECK_THROWS_AS(attach_embeddings(corpus, wrong), ValidationError);

    Eigen::MatrixXd zero(3, 2);
    zero.setZero();
    zero(0, 0) = 1.0;
    zero(1, 1) = 1.0;
    CHECK_THROWS_AS(attach_embeddings(corpus, zero), ValidationError);
}
