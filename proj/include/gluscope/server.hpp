#pragma once

#include <filesystem>

namespace httplib {
class Server;
}

namespace gluscope {

// Read-only routes over a page bundle directory:
//   GET /index        -> index.json
//   GET /pages/{id}   -> pages/{id}.json
//   GET /<file>       -> static viewer assets under the directory
void configure_server(httplib::Server& server, const std::filesystem::path& dir);

} // namespace gluscope
