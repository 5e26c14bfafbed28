// Test child speaking the predictor wire protocol. The default mode answers
// every request with the box interior ("echo" of the prompt); other modes
// misbehave in one specific way each.
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <thread>

#include "segaudit/pnm.hpp"

using nlohmann::json;
using namespace segaudit;

namespace {

void send(const json& msg) { std::cout << msg.dump() << "\n" << std::flush; }

[[noreturn]] void hang() {
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

}  // namespace

int main(int argc, char** argv) {
    std::string mode = "box_fill";
    int threshold = 128;
    int crash_after = -1;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--mode" && i + 1 < argc) mode = argv[++i];
        else if (arg == "--threshold" && i + 1 < argc) threshold = std::atoi(argv[++i]);
        else if (arg == "--crash-after" && i + 1 < argc) crash_after = std::atoi(argv[++i]);
    }

    int served = 0;
    std::string line;
    while (std::getline(std::cin, line)) {
        json msg;
        try {
            msg = json::parse(line);
        } catch (const json::parse_error&) {
            send({{"type", "error"}, {"id", nullptr}, {"message", "unparseable request"}});
            continue;
        }
        const std::string type = msg.value("type", "");
        if (type == "hello") {
            if (mode == "malformed") {
                std::cout << "this is not json\n" << std::flush;
            } else if (mode == "bad-version") {
                send({{"type", "ready"}, {"name", "fake"}, {"version", 2}});
            } else if (mode == "silent") {
                hang();
            } else {
                send({{"type", "ready"}, {"name", "fake-" + mode}});
            }
        } else if (type == "predict") {
            if (crash_after >= 0 && served >= crash_after) return 3;
            ++served;
            const std::string id = msg.value("id", "");
            if (mode == "hang-predict") hang();
            if (mode == "error-reply") {
                send({{"type", "error"}, {"id", id}, {"message", "model unavailable"}});
                continue;
            }
            const Rgb8Slice image = read_ppm(msg.at("image").get<std::string>());
            const auto& b = msg.at("box");
            const int x0 = b[0], y0 = b[1], x1 = b[2], y1 = b[3];
            const int w = mode == "wrong-dims" ? image.width + 1 : image.width;
            Gray8Slice mask(w, image.height, 0);
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const bool fg = mode != "threshold" || image.at(x, y).r >= threshold;
                    mask.at(x, y) = fg ? (mode == "nonbinary" ? 7 : 255) : 0;
                }
            }
            const std::string out = msg.at("image").get<std::string>() + ".mask.pgm";
            write_pgm(out, mask);
            send({{"type", "mask"}, {"id", mode == "wrong-id" ? id + "-x" : id}, {"mask", out}, {"extra", 1}});
        } else if (type == "shutdown") {
            if (mode == "hang-shutdown") hang();
            return 0;
        } else {
            send({{"type", "error"}, {"id", msg.value("id", json(nullptr))}, {"message", "unknown type " + type}});
        }
    }
    if (mode == "hang-shutdown") hang();
    return 0;
}
