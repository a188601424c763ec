#include "intellipred/corpus.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace intellipred;
using intellipred::support::TempDir;

namespace {

SimulationSpec manifest_only_spec(std::size_t n_rir, std::size_t n_noise)
{
    SimulationSpec spec;
    spec.seed = 42;
    for (std::size_t i = 0; i < n_rir; ++i)
        spec.rir_manifest.push_back({"rir" + std::to_string(i), "unused"});
    for (std::size_t i = 0; i < n_noise; ++i)
        spec.noise_manifest.push_back({"noise" + std::to_string(i), "unused"});
    return spec;
}

/// Writes a small corpus (speech, rir, noise) and returns a spec pointing at it.
SimulationSpec fixture_corpus(const TempDir& dir, std::size_t n_speech, std::size_t speech_len = 1600,
                              std::size_t noise_len = 4000)
{
    std::mt19937_64 rng(2024);
    SimulationSpec spec;
    spec.seed = 99;
    for (std::size_t i = 0; i < n_speech; ++i) {
        const auto p = dir / ("speech" + std::to_string(i) + ".wav");
        auto w = support::random_waveform(rng, speech_len + 37 * i, 16000, 0.2);
        write_wav(w, p);
        spec.speech_manifest.push_back({"utt" + std::to_string(i), p});
    }
    Waveform impulse{{1.0}, 16000};
    write_wav(impulse, dir / "rir_impulse.wav");
    Waveform room{{1.0, 0.0, 0.5, 0.0, 0.25, -0.125, 0.0625}, 16000};
    write_wav(room, dir / "rir_room.wav");
    spec.rir_manifest = {{"impulse", dir / "rir_impulse.wav"}, {"room", dir / "rir_room.wav"}};
    for (int k = 0; k < 2; ++k) {
        const auto p = dir / ("noise" + std::to_string(k) + ".wav");
        write_wav(support::random_waveform(rng, noise_len, 16000, 0.3), p);
        spec.noise_manifest.push_back({"noise" + std::to_string(k), p});
    }
    spec.output_dir = dir / "out";
    return spec;
}

} // namespace

TEST(SampleCondition, DegenerateSnrRange)
{
    auto spec = manifest_only_spec(3, 3);
    spec.snr_low = spec.snr_high = 0.0;
    for (std::uint64_t seed : {0ull, 1ull, 12345ull}) {
        spec.seed = seed;
        for (std::uint64_t i = 0; i < 20; ++i)
            EXPECT_EQ(sample_condition(spec, i).snr_db, 0.0);
    }
}

TEST(SampleCondition, SingleRirAlwaysChosen)
{
    auto spec = manifest_only_spec(1, 4);
    for (std::uint64_t i = 0; i < 100; ++i)
        EXPECT_EQ(sample_condition(spec, i).rir_id, "rir0");
}

TEST(SampleCondition, UniformStatistics)
{
    auto spec = manifest_only_spec(5, 7);
    double lo = 1e9, hi = -1e9, sum = 0;
    std::vector<int> rir_counts(5), noise_counts(7);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto c = sample_condition(spec, static_cast<std::uint64_t>(i));
        lo = std::min(lo, c.snr_db);
        hi = std::max(hi, c.snr_db);
        sum += c.snr_db;
        ++rir_counts[c.rir_index];
        ++noise_counts[c.noise_index];
    }
    EXPECT_GE(lo, -6.0);
    EXPECT_LE(hi, 6.0);
    EXPECT_NEAR(sum / n, 0.0, 0.2);
    // each bucket within 5 sigma of its binomial mean
    for (int c : rir_counts)
        EXPECT_NEAR(c, n / 5.0, 5 * std::sqrt(n * 0.2 * 0.8));
    for (int c : noise_counts)
        EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0 * (6.0 / 7.0)));
}

TEST(SampleCondition, PureFunctionOfSeedAndIndex)
{
    auto spec = manifest_only_spec(4, 4);
    std::vector<Condition> forward;
    for (std::uint64_t i = 0; i < 50; ++i)
        forward.push_back(sample_condition(spec, i));
    for (std::uint64_t i = 50; i-- > 0;) {
        const auto c = sample_condition(spec, i);
        EXPECT_EQ(c.snr_db, forward[i].snr_db);
        EXPECT_EQ(c.rir_id, forward[i].rir_id);
        EXPECT_EQ(c.offset_draw, forward[i].offset_draw);
    }
    spec.seed = 43;
    int differing = 0;
    for (std::uint64_t i = 0; i < 50; ++i)
        differing += sample_condition(spec, i).snr_db != forward[i].snr_db;
    EXPECT_GT(differing, 45);
}

TEST(SampleCondition, EmptyManifestRejected)
{
    auto spec = manifest_only_spec(0, 1);
    EXPECT_THROW(sample_condition(spec, 0), ValidationError);
    spec = manifest_only_spec(1, 0);
    EXPECT_THROW(sample_condition(spec, 0), ValidationError);
}

TEST(NoiseSegment, LoopsShortNoiseAndCropsLongNoise)
{
    Waveform noise{{1, 2, 3}, 16000};
    const auto looped = noise_segment(noise, 7, 0);
    EXPECT_EQ(looped.samples, (std::vector<double>{1, 2, 3, 1, 2, 3, 1}));
    const auto looped_off = noise_segment(noise, 4, ~0ull);
    EXPECT_EQ(looped_off.samples, (std::vector<double>{3, 1, 2, 3}));

    Waveform longer{{1, 2, 3, 4, 5}, 16000};
    EXPECT_EQ(noise_segment(longer, 2, 0).samples, (std::vector<double>{1, 2}));
    EXPECT_EQ(noise_segment(longer, 2, ~0ull).samples, (std::vector<double>{4, 5}));
}

TEST(SimulateCorpus, NearNoiselessIdentity)
{
    TempDir dir;
    auto spec = fixture_corpus(dir, 3);
    spec.rir_manifest = {spec.rir_manifest[0]}; // unit impulse
    spec.snr_low = spec.snr_high = 60.0;
    const auto manifest = simulate_corpus(spec);
    ASSERT_EQ(manifest.size(), 3u);
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto speech = read_wav(spec.speech_manifest[i].path);
        const auto out = read_wav(spec.output_dir / manifest[i].output_path);
        ASSERT_EQ(out.size(), speech.size());
        double dev = 0;
        for (std::size_t k = 0; k < out.size(); ++k)
            dev = std::max(dev, std::abs(out.samples[k] - speech.samples[k]));
        EXPECT_LT(dev, 1e-3);
    }
}

TEST(SimulateCorpus, DeterministicBytesAcrossRunsAndJobCounts)
{
    TempDir dir;
    auto spec = fixture_corpus(dir, 6);
    spec.output_dir = dir / "a";
    spec.jobs = 1;
    const auto m1 = simulate_corpus(spec);
    spec.output_dir = dir / "b";
    spec.jobs = 4;
    const auto m2 = simulate_corpus(spec);
    EXPECT_EQ(m1, m2);
    EXPECT_EQ(format_manifest(m1), format_manifest(m2));
    for (const auto& e : m1)
        EXPECT_EQ(support::read_bytes(dir / "a" / e.output_path), support::read_bytes(dir / "b" / e.output_path));
}

TEST(SimulateCorpus, MeasuredSnrMatchesManifest)
{
    TempDir dir;
    auto spec = fixture_corpus(dir, 8, 1200, 800); // noise shorter than speech: looping path
    const auto manifest = simulate_corpus(spec);
    const auto f = default_speech_weighting(16000);
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& e = manifest[i];
        EXPECT_GE(e.snr_db, spec.snr_low);
        EXPECT_LE(e.snr_db, spec.snr_high);
        const auto speech = read_wav(spec.speech_manifest[i].path);
        const auto rir_path = e.rir_id == "impulse" ? spec.rir_manifest[0].path : spec.rir_manifest[1].path;
        const auto reverberant = convolve(speech, read_wav(rir_path));
        const auto noisy = read_wav(spec.output_dir / e.output_path);
        ASSERT_EQ(noisy.size(), reverberant.size());
        Waveform residual = noisy;
        for (std::size_t k = 0; k < residual.size(); ++k)
            residual.samples[k] -= reverberant.samples[k];
        const double measured = snr_db(weighted_power(reverberant, f), weighted_power(residual, f));
        EXPECT_NEAR(measured, e.snr_db, 0.01) << e.utterance_id;
    }
}

TEST(SimulateCorpus, Errors)
{
    TempDir dir;
    auto spec = fixture_corpus(dir, 2);
    Waveform silent{std::vector<double>(4000, 0.0), 16000};
    write_wav(silent, dir / "silent.wav");
    auto zero_noise = spec;
    zero_noise.noise_manifest = {{"silent", dir / "silent.wav"}};
    EXPECT_THROW(simulate_corpus(zero_noise), ValidationError);

    Waveform other_rate{{0.1, 0.2, 0.3}, 8000};
    write_wav(other_rate, dir / "rate8k.wav");
    auto mismatch = spec;
    mismatch.rir_manifest = {{"r8k", dir / "rate8k.wav"}};
    EXPECT_THROW(simulate_corpus(mismatch), ValidationError);

    auto unreadable = spec;
    unreadable.speech_manifest[1].path = dir / "does-not-exist.wav";
    EXPECT_THROW(simulate_corpus(unreadable), IoError);

    auto dup = spec;
    dup.speech_manifest[1].id = dup.speech_manifest[0].id;
    EXPECT_THROW(simulate_corpus(dup), ValidationError);

    auto inverted = spec;
    inverted.snr_low = 3;
    inverted.snr_high = -3;
    EXPECT_THROW(simulate_corpus(inverted), ValidationError);
}

TEST(Manifest, CsvLayoutAndRoundTrip)
{
    TempDir dir;
    std::vector<CorpusManifestEntry> entries = {{"u1", "u1", "r", "n", -5.5, "u1.wav"},
                                                {"u,2", "u,2", "r", "n", 1.0 / 3.0, "u,2.wav"}};
    write_manifest(entries, dir / "m.csv");
    const auto text = support::read_text(dir / "m.csv");
    EXPECT_EQ(text, "utterance_id,speech_id,rir_id,noise_id,snr_db,output_path\n"
                    "u1,u1,r,n,-5.500000,u1.wav\n"
                    "\"u,2\",\"u,2\",r,n,0.333333,\"u,2.wav\"\n");
    const auto back = read_manifest(dir / "m.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].utterance_id, "u,2");
    EXPECT_DOUBLE_EQ(back[1].snr_db, 0.333333);
}

TEST(SpecFile, LoadsAndResolvesRelativePaths)
{
    TempDir dir;
    csv::write_text(dir / "spec.json", R"({
        "seed": 7, "snr_low": -3, "snr_high": 3, "output_dir": "out", "channel": "left",
        "speech_manifest": [{"id": "s1", "path": "speech/s1.wav"}],
        "rir_manifest": [{"id": "r1", "path": "/abs/r1.wav"}],
        "noise_manifest": [{"id": "n1", "path": "n1.wav"}]
    })");
    const auto spec = load_simulation_spec(dir / "spec.json");
    EXPECT_EQ(spec.seed, 7u);
    EXPECT_EQ(spec.snr_low, -3.0);
    EXPECT_EQ(spec.snr_high, 3.0);
    EXPECT_EQ(spec.output_dir, dir / "out");
    EXPECT_EQ(spec.channel, ChannelSelect::Left);
    EXPECT_EQ(spec.speech_manifest[0].path, dir / "speech/s1.wav");
    EXPECT_EQ(spec.rir_manifest[0].path, std::filesystem::path("/abs/r1.wav"));
    EXPECT_FALSE(spec.weighting.has_value());

    csv::write_text(dir / "bad.json", R"({"speech_manifest": [{"id": 1}]})");
    EXPECT_THROW(load_simulation_spec(dir / "bad.json"), FormatError);
    EXPECT_THROW(load_simulation_spec(dir / "missing.json"), IoError);
}
