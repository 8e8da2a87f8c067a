#include "gluscope/server.hpp"

#include <regex>

#include <httplib.h>

#include "gluscope/errors.hpp"
#include "gluscope/io_util.hpp"

namespace gluscope {

namespace {

void send_json_file(const std::filesystem::path& path, httplib::Response& res) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        res.status = 404;
        res.set_content("{\"error\":\"not found\"}\n", "application/json");
        return;
    }
    res.set_content(read_file(path), "application/json");
}

} // namespace

void configure_server(httplib::Server& server, const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("serve: " + dir.string() + " is not a directory");
    const auto root = std::filesystem::absolute(dir);

    server.set_file_extension_and_mimetype_mapping("json", "application/json");
    server.set_file_extension_and_mimetype_mapping("js", "text/javascript");
    server.set_file_extension_and_mimetype_mapping("mjs", "text/javascript");
    server.set_mount_point("/", root.string());

    server.Get("/index", [root](const httplib::Request&, httplib::Response& res) {
        send_json_file(root / "index.json", res);
    });
    server.Get(R"(/pages/(L\d+_N\d+))", [root](const httplib::Request& req, httplib::Response& res) {
        send_json_file(root / "pages" / (req.matches[1].str() + ".json"), res);
    });
}

} // namespace gluscope
