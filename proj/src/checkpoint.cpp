#include "icred/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "icred/errors.hpp"

namespace icred {

void save_checkpoint(const std::string& path, const ParamMap& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << kCheckpointMagic << "\n" << params.size() << "\n";
  for (const auto& [name, t] : params) {
    out << name << " " << t.rank();
    for (std::size_t d : t.shape()) out << " " << d;
    out << "\n";
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
    out << "\n";
  }
  if (!out) throw IoError("short write on checkpoint: " + path);
}

ParamMap load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) {
    throw IoError("checkpoint header mismatch in " + path + ": expected " +
                  std::string(kCheckpointMagic) + ", got \"" + magic + "\"");
  }
  std::size_t count = 0;
  in >> count;
  in.ignore();  // newline
  ParamMap out;
  for (std::size_t e = 0; e < count; ++e) {
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string name;
    std::size_t rank = 0;
    hs >> name >> rank;
    if (name.empty() || rank == 0) throw IoError("bad tensor header in " + path + ": " + header);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank; ++i) {
      hs >> shape[i];
      n *= shape[i];
    }
    std::vector<double> data(n);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    in.ignore();  // newline
    if (!in) throw IoError("truncated checkpoint while reading parameter " + name);
    out.emplace(name, Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace icred
