#include <gtest/gtest.h>

#include <filesystem>

#include "skewersim/perception.hpp"
#include "skewersim/simworld.hpp"

using namespace skewersim;
using namespace skewersim::perception;

namespace {

sim::FoodItem make_item(int id, Vec2 c, double major, double minor, double angle_deg) {
    sim::FoodItem it;
    it.id = id;
    it.center = c;
    it.major_axis = major;
    it.minor_axis = minor;
    it.axis_angle = deg2rad(angle_deg);
    it.appearance = {0.1, 0.8, 0.9, 1 - minor / major};
    it.nominal_height = 0.02;
    it.height = 0.02;
    it.material.stiffness = 1000;
    it.material.fracture_force = 40;
    it.material.pierce_depth = 0.01;
    return it;
}

sim::PlateState single(const sim::FoodItem& it) {
    sim::PlateState p;
    p.items.push_back(it);
    return p;
}

double angle_diff_mod_pi(double a, double b) {
    double d = std::fmod(std::abs(a - b), std::numbers::pi);
    return std::min(d, std::numbers::pi - d);
}

}  // namespace

TEST(RenderOverhead, EmptyPlateIsUniformGray) {
    sim::PlateState p;
    const auto img = render_overhead(p, 3);
    const Camera cam = img.camera();
    for (int r = 0; r < img.pixels.height; ++r)
        for (int c = 0; c < img.pixels.width; ++c) {
            const auto px = img.pixels.pixel(r, c);
            EXPECT_TRUE(is_plate_or_table(px));
            if (cam.to_world({double(c), double(r)}).norm() < p.plate_radius - 0.003) {
                EXPECT_LE(color_distance(px, kPlateGray), kGrayTolerance);
            }
        }
}

TEST(RenderOverhead, DeterministicGivenSeed) {
    const auto plate = sim::spawn_plate({"", {{"grape", 3}, {"kiwi", 2}}}, sim::default_archetype_table(), 5);
    EXPECT_EQ(render_overhead(plate, 9).pixels, render_overhead(plate, 9).pixels);
    EXPECT_NE(render_overhead(plate, 9).pixels, render_overhead(plate, 10).pixels);
}

TEST(RenderOverhead, CentroidMatchesProjectedCenter) {
    const auto it = make_item(0, {0.013, -0.021}, 0.04, 0.025, 35);
    const auto img = render_overhead(single(it), 1);
    double sx = 0, sy = 0;
    int n = 0;
    for (int r = 0; r < img.pixels.height; ++r)
        for (int c = 0; c < img.pixels.width; ++c)
            if (!is_plate_or_table(img.pixels.pixel(r, c))) sx += c, sy += r, ++n;
    ASSERT_GT(n, 50);
    const Vec2 expect = img.camera().to_px(it.center);
    EXPECT_LT((Vec2{sx / n, sy / n} - expect).norm(), 1.0);
}

TEST(RenderOverhead, MisleadingTwinsRenderIdentically) {
    const auto table = sim::default_archetype_table();
    double mean[2][3] = {};
    double sq[2][3] = {};
    const char* names[2] = {"raw_squash", "boiled_squash"};
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 100; ++s) {
            const auto plate = sim::spawn_plate({"", {{names[a], 1}}}, table, static_cast<std::uint64_t>(s));
            const auto img = render_overhead(plate, static_cast<std::uint64_t>(1000 + s));
            double acc[3] = {};
            int n = 0;
            for (int r = 0; r < img.pixels.height; ++r)
                for (int c = 0; c < img.pixels.width; ++c)
                    if (!is_plate_or_table(img.pixels.pixel(r, c))) {
                        for (int ch = 0; ch < 3; ++ch) acc[ch] += img.pixels.at(r, c, ch);
                        ++n;
                    }
            for (int ch = 0; ch < 3; ++ch) {
                mean[a][ch] += acc[ch] / n / 100.0;
                sq[a][ch] += (acc[ch] / n) * (acc[ch] / n) / 100.0;
            }
        }
    for (int ch = 0; ch < 3; ++ch) {
        const double var = (sq[0][ch] - mean[0][ch] * mean[0][ch]) + (sq[1][ch] - mean[1][ch] * mean[1][ch]);
        const double se = std::sqrt(std::max(var, 0.0) / 100.0);
        EXPECT_LE(std::abs(mean[0][ch] - mean[1][ch]), 2 * se + 1e-12);
    }
}

TEST(RenderLocal, ForkChevronAlwaysDrawn) {
    sim::PlateState p;
    const auto local = render_local(p, {0.0, 0.0});
    EXPECT_EQ(local.pixels.pixel(16, 16), kForkWhite);
    EXPECT_EQ(local.pixels.pixel(19, 13), kForkWhite);
    EXPECT_EQ(local.pixels.pixel(19, 19), kForkWhite);
    EXPECT_TRUE(local.visible_food.empty());
}

TEST(DetectItems, NoiseFreeIsIdentityOnTrueBoxes) {
    const auto plate = sim::spawn_plate({"", {{"grape", 4}, {"celery", 3}, {"banana", 3}}}, sim::default_archetype_table(), 2);
    const auto img = render_overhead(plate);
    Rng rng(1);
    const auto dets = detect_items(img, plate, rng, DetectionNoise::none());
    ASSERT_EQ(dets.size(), plate.items.size());
    for (std::size_t k = 0; k < dets.size(); ++k) {
        const auto& it = plate.items[k];
        const Box t = true_box(it, img);
        EXPECT_FALSE(dets[k].is_false_positive);
        EXPECT_NEAR(dets[k].box.cx, t.cx, 1e-9);
        EXPECT_NEAR(dets[k].box.cy, t.cy, 1e-9);
        EXPECT_NEAR(dets[k].box.w, t.w, 1e-9);
        // hull oracle: extreme points of the parametrised ellipse
        double xmax = 0, ymax = 0;
        for (int s = 0; s < 3600; ++s) {
            const double th = 2 * std::numbers::pi * s / 3600;
            const double u = 0.5 * it.major_axis * std::cos(th), v = 0.5 * it.minor_axis * std::sin(th);
            xmax = std::max(xmax, u * std::cos(it.axis_angle) - v * std::sin(it.axis_angle));
            ymax = std::max(ymax, u * std::sin(it.axis_angle) + v * std::cos(it.axis_angle));
        }
        EXPECT_NEAR(t.w, 2 * xmax / img.meters_per_pixel, 1e-3);
        EXPECT_NEAR(t.h, 2 * ymax / img.meters_per_pixel, 1e-3);
    }
}

TEST(DetectItems, FalseNegativeRateOnTenItems) {
    const auto plate = sim::spawn_plate({"", {{"grape", 4}, {"kiwi", 3}, {"apple", 3}}}, sim::default_archetype_table(), 8);
    const auto img = render_overhead(plate);
    DetectionNoise noise{0.05, 0.0, 2.0};
    double total = 0;
    for (int s = 0; s < 1000; ++s) {
        Rng rng(static_cast<std::uint64_t>(s));
        const auto d = detect_items(img, plate, rng, noise);
        for (const auto& x : d) {
            EXPECT_GT(x.box.w, 0);
            EXPECT_GE(x.box.cx - 0.5 * x.box.w, -0.5 - 1e-9);
            EXPECT_LE(x.box.cx + 0.5 * x.box.w, 127.5 + 1e-9);
        }
        total += static_cast<double>(d.size());
    }
    const double mean = total / 1000;
    EXPECT_GE(mean, 9.3);
    EXPECT_LE(mean, 9.7);
}

TEST(DetectItems, SpuriousRateOnEmptyPlate) {
    sim::PlateState p;
    const auto img = render_overhead(p);
    int hits = 0;
    for (int s = 0; s < 10000; ++s) {
        Rng rng(static_cast<std::uint64_t>(s));
        const auto d = detect_items(img, p, rng);
        for (const auto& x : d) EXPECT_TRUE(x.is_false_positive);
        hits += static_cast<int>(d.size());
    }
    // 4 binomial standard deviations around 0.02
    EXPECT_NEAR(hits / 10000.0, 0.02, 4 * std::sqrt(0.02 * 0.98 / 10000));
}

TEST(EstimatePose, CircularItemTieBreaksToZero) {
    const auto it = make_item(0, {0.01, 0.02}, 0.03, 0.03, 0);
    const auto img = render_overhead(single(it));
    const auto pose = estimate_pose(img, true_box(it, img), single(it));
    EXPECT_EQ(pose.gamma, 0.0);
}

TEST(EstimatePose, RollIsPerpendicularToMajorAxis) {
    const auto it = make_item(0, {0.0, 0.0}, 0.045, 0.02, 30);
    const auto img = render_overhead(single(it), 4);
    const auto pose = estimate_pose(img, true_box(it, img), single(it));
    EXPECT_LE(rad2deg(angle_diff_mod_pi(pose.gamma, deg2rad(120))), 3.0);
    EXPECT_GE(pose.gamma, 0.0);
    EXPECT_LT(pose.gamma, std::numbers::pi);
    EXPECT_NEAR(pose.keypoint.x, 0.0, kOverheadMpp);
    EXPECT_NEAR(pose.keypoint.y, 0.0, kOverheadMpp);
    EXPECT_DOUBLE_EQ(pose.keypoint.z, 0.02);
}

TEST(EstimatePose, RollInvariantUnderTranslation) {
    for (double ang : {10.0, 55.0, 100.0, 160.0}) {
        const auto a = make_item(0, {0.0, 0.0}, 0.05, 0.022, ang);
        auto b = a;
        b.center = {0.0371, -0.0293};
        const auto ia = render_overhead(single(a), 1), ib = render_overhead(single(b), 1);
        const double ga = estimate_pose(ia, true_box(a, ia), single(a)).gamma;
        const double gb = estimate_pose(ib, true_box(b, ib), single(b)).gamma;
        EXPECT_LE(rad2deg(angle_diff_mod_pi(ga, gb)), 1.0) << ang;
    }
}

TEST(EstimatePose, BareBoxIsNoItem) {
    sim::PlateState p;
    const auto img = render_overhead(p);
    EXPECT_THROW(estimate_pose(img, {64, 64, 10, 10}, p), NoItemError);
}

TEST(EstimatePose, HeightWithinBounds) {
    const auto table = sim::default_archetype_table();
    for (int s = 0; s < 20; ++s) {
        const auto plate = sim::spawn_plate({"", {{"apple", 2}, {"banana", 2}, {"broccoli", 2}}}, table, static_cast<std::uint64_t>(s));
        const auto img = render_overhead(plate, static_cast<std::uint64_t>(s));
        for (const auto& it : plate.items) {
            const auto pose = estimate_pose(img, true_box(it, img), plate);
            EXPECT_GE(pose.keypoint.z, plate.plate_z);
            EXPECT_LE(pose.keypoint.z, plate.plate_z + 0.06);
            EXPECT_DOUBLE_EQ(pose.keypoint.z, plate.plate_z + it.nominal_height);
        }
    }
}

TEST(ServoOffset, OracleNoiseFreeReturnsExactOffset) {
    const Vec2 fork{0.01, -0.02};
    const auto it = make_item(0, fork + Vec2{5 * kLocalMpp, 3 * kLocalMpp}, 0.03, 0.03, 0);
    const auto local = render_local(single(it), fork);
    Rng rng(1);
    ServoOptions opt;
    opt.sigma_px = 0.0;
    const auto off = servo_offset(local, opt, rng).offset();
    EXPECT_NEAR(off.x, 5.0, 1e-9);
    EXPECT_NEAR(off.y, -3.0, 1e-9);
}

TEST(ServoOffset, EmptyFrameIsTargetLost) {
    sim::PlateState p;
    const auto local = render_local(p, {0.0, 0.0});
    Rng rng(1);
    EXPECT_THROW(servo_offset(local, {}, rng), TargetLostError);
    ServoOptions learned;
    learned.mode = ServoMode::Learned;
    EXPECT_THROW(servo_offset(local, learned, rng), ModeError);
}

TEST(ServoLoop, ConvergesFromTwentyFourPixelsInAnyDirection) {
    const auto it = make_item(0, {0.0, 0.0}, 0.05, 0.05, 0);
    ServoOptions opt;
    opt.sigma_px = 0.0;
    for (int k = 0; k < 16; ++k) {
        const double th = 2 * std::numbers::pi * k / 16;
        const Vec2 start{24 * kLocalMpp * std::cos(th), 24 * kLocalMpp * std::sin(th)};
        PoseEstimate pose{{start.x, start.y, 0.02}, 0.0};
        Rng rng(static_cast<std::uint64_t>(k));
        const auto res = servo_loop(single(it), {}, pose, opt, rng);
        EXPECT_LE(res.final_offset_px.norm(), 1.0);
        EXPECT_LE(res.steps, 9);
        EXPECT_NEAR(res.fork.position.z, 0.03, 1e-12);
    }
}

TEST(ServoLoop, ContractionPerStep) {
    const auto it = make_item(0, {0.0, 0.0}, 0.05, 0.05, 0);
    ServoOptions opt;
    opt.sigma_px = 0.0;
    opt.stop_px = 0.0;
    opt.max_steps = 1;
    Vec2 xy{-20 * kLocalMpp, 11 * kLocalMpp};
    double prev = 1e9;
    for (int k = 0; k < 8; ++k) {
        Rng rng(1);
        const auto res = servo_loop(single(it), {}, {{xy.x, xy.y, 0.02}, 0.0}, opt, rng);
        const double off = res.final_offset_px.norm();
        if (k > 0) {
            EXPECT_LE(off, 0.5 * prev + 1.0);
        }
        if (k >= 2) {
            EXPECT_LE(off, prev);
        }
        prev = off;
        xy = {res.fork.position.x, res.fork.position.y};
    }
}

TEST(ServoLoop, ZeroOffsetStopsAfterOneRender) {
    const auto it = make_item(0, {0.02, 0.0}, 0.03, 0.03, 0);
    ServoOptions opt;
    opt.sigma_px = 0.0;
    Rng rng(3);
    const auto res = servo_loop(single(it), {}, {{0.02, 0.0, 0.02}, 0.0}, opt, rng);
    EXPECT_EQ(res.steps, 1);
    EXPECT_NEAR(res.fork.position.x, 0.02, 1e-12);
    EXPECT_NEAR(res.fork.position.y, 0.0, 1e-12);
}

TEST(ServoLoop, ZeroMaxStepsLeavesForkAtPose) {
    const auto it = make_item(0, {0.0, 0.0}, 0.03, 0.03, 0);
    ServoOptions opt;
    opt.max_steps = 0;
    Rng rng(3);
    const auto res = servo_loop(single(it), {}, {{4 * kLocalMpp, 0.0, 0.02}, 0.7}, opt, rng);
    EXPECT_EQ(res.steps, 0);
    EXPECT_NEAR(res.fork.position.x, 4 * kLocalMpp, 1e-12);
    EXPECT_NEAR(res.final_offset_px.x, -4.0, 1e-9);
    EXPECT_DOUBLE_EQ(res.fork.roll, 0.7);
}

TEST(ServoLoop, PropagatesTargetLost) {
    const auto it = make_item(0, {0.0, 0.0}, 0.02, 0.02, 0);
    Rng rng(3);
    EXPECT_THROW(servo_loop(single(it), {}, {{0.09, 0.0, 0.02}, 0.0}, {}, rng), TargetLostError);
}

TEST(ServoModel, UntrainedLossIsNearLn2) {
    ServoDataConfig dc;
    dc.base_renders = 20;
    dc.total = 40;
    const auto data = generate_servo_dataset(sim::default_archetype_table(), 1, dc);
    ServoTrainConfig cfg;
    cfg.epochs = 0;
    const auto r = train_servo_model(data, cfg);
    EXPECT_NEAR(r.final_loss, std::log(2.0), 0.1 * std::log(2.0));
}

TEST(ServoModel, EmptyDatasetRejected) {
    EXPECT_THROW(train_servo_model({}, {}), ConfigError);
}

TEST(ServoModel, AllZeroTargetsGoToTargetLost) {
    ServoDataConfig dc;
    dc.base_renders = 20;
    dc.total = 40;
    auto data = generate_servo_dataset(sim::default_archetype_table(), 2, dc);
    for (auto& s : data) s.fork_px.reset(), s.food_px.reset();
    ServoTrainConfig cfg;
    cfg.epochs = 15;
    cfg.lr = 1e-2;
    auto r = train_servo_model(data, cfg);
    EXPECT_LT(r.final_loss, 0.01);
    ServoOptions opt;
    opt.mode = ServoMode::Learned;
    opt.model = &r.model;
    LocalImage local;
    local.pixels = data[0].image;
    Rng rng(1);
    EXPECT_THROW(servo_offset(local, opt, rng), TargetLostError);
}

TEST(ServoModel, FitsItsOwnTrainingImages) {
    ServoDataConfig dc;
    dc.base_renders = 100;
    dc.total = 400;
    const auto data = generate_servo_dataset(sim::default_archetype_table(), 5, dc);
    ServoTrainConfig cfg;
    cfg.epochs = 15;
    cfg.lr = 1e-2;
    auto r = train_servo_model(data, cfg);
    const auto e = keypoint_error(r.model, data);
    EXPECT_LE(e.fork, 2.0);
    EXPECT_LE(e.food, 2.0);
}

TEST(ServoModel, GradientCheckDouble) {
    ServoDataConfig dc;
    dc.base_renders = 4;
    dc.total = 4;
    const auto data = generate_servo_dataset(sim::default_archetype_table(), 6, dc);
    ServoNet<double> net;
    Rng rng(2);
    net.init(rng);
    for (auto* p : net.params()) init_uniform(p->value, rng, 0.3);  // escape the near-zero head
    const auto x = ServoNet<double>::input_tensor(data[0].image);
    const auto t = servo_targets(data[0]).cast<double>();
    auto params = net.params();
    auto loss = [&] { return nn::sigmoid_bce(net.forward(x), t).loss; };
    auto backprop = [&] {
        for (auto* p : params) p->grad.zero();
        net.backward(nn::sigmoid_bce(net.forward(x), t).grad);
    };
    EXPECT_LT(nn::gradient_check(params, loss, backprop).max_rel_error, 1e-4);
}

TEST(ServoModel, CheckpointRoundTrip) {
    ServoNet<float> a;
    Rng rng(4);
    a.init(rng);
    auto b = ServoNet<float>::from_json(nlohmann::json::parse(a.to_json().dump()));
    Image img(32, 32, {0.5f, 0.3f, 0.2f});
    EXPECT_EQ(a.predict(img).food, b.predict(img).food);
}

TEST(ImageIo, PpmAndDatasetRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "skewersim_servo_io";
    std::filesystem::remove_all(dir);
    ServoDataConfig dc;
    dc.base_renders = 3;
    dc.total = 6;
    const auto data = generate_servo_dataset(sim::default_archetype_table(), 9, dc);
    write_servo_dataset(dir, data);
    const auto back = read_servo_dataset(dir);
    ASSERT_EQ(back.size(), data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        EXPECT_EQ(back[i].fork_px.has_value(), data[i].fork_px.has_value());
        for (std::size_t k = 0; k < data[i].image.data.size(); ++k)
            ASSERT_NEAR(back[i].image.data[k], data[i].image.data[k], 0.5 / 255 + 1e-6);
    }
    std::filesystem::remove_all(dir);
}
