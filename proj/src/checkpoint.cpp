#include "s2p/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "s2p/error.hpp"

namespace s2p {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw Error(ErrorKind::io, "malformed number '" + std::string(text) + "'");
  return v;
}

const ParameterSet& Checkpoint::section(const std::string& name) const {
  for (const auto& [n, p] : sections)
    if (n == name) return p;
  throw Error(ErrorKind::io, "checkpoint has no section " + name);
}

namespace {

void write_values(std::ostream& out, const char* tag, const Array& a) {
  out << tag;
  for (double v : a.values()) out << ' ' << format_double(v);
  out << '\n';
}

void read_values(std::istream& in, const char* tag, Array& a) {
  std::string word;
  if (!(in >> word) || word != tag) throw Error(ErrorKind::io, std::string("expected ") + tag);
  for (double& v : a.values()) {
    if (!(in >> word)) throw Error(ErrorKind::io, "truncated array data");
    v = parse_double(word);
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << "s2p-checkpoint " << kCheckpointVersion << '\n';
  for (const auto& [k, v] : ckpt.meta) out << "meta " << k << ' ' << v << '\n';
  for (const auto& [k, r] : ckpt.rngs) out << "rng " << k << ' ' << r.serialize() << '\n';
  for (const auto& [name, params] : ckpt.sections) {
    out << "section " << name << ' ' << params.size() << '\n';
    for (const auto& p : params.entries()) {
      out << "array " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << ' '
          << (p.frozen ? 1 : 0) << ' ' << p.step << '\n';
      write_values(out, "value", p.value);
      write_values(out, "m1", p.first_moment);
      write_values(out, "m2", p.second_moment);
    }
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "s2p-checkpoint")
    throw Error(ErrorKind::io, "not an s2p checkpoint");
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::io, "unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  std::string word;
  while (in >> word) {
    if (word == "end") return ckpt;
    if (word == "meta") {
      std::string key, value;
      in >> key;
      std::getline(in, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (word == "rng") {
      std::string key, state;
      in >> key;
      std::getline(in, state);
      ckpt.rngs.insert_or_assign(key, RngStream::deserialize(state));
    } else if (word == "section") {
      std::string name;
      std::size_t count = 0;
      in >> name >> count;
      ParameterSet params;
      RngStream unused(0);
      for (std::size_t i = 0; i < count; ++i) {
        std::string tag, pname;
        std::size_t rows = 0, cols = 0;
        int frozen = 0;
        std::uint64_t step = 0;
        if (!(in >> tag >> pname >> rows >> cols >> frozen >> step) || tag != "array")
          throw Error(ErrorKind::io, "malformed array header");
        params.add(pname, rows, cols, Init::zeros, unused);
        Parameter& p = params.at(pname);
        p.frozen = frozen != 0;
        p.step = step;
        read_values(in, "value", p.value);
        read_values(in, "m1", p.first_moment);
        read_values(in, "m2", p.second_moment);
      }
      ckpt.sections.emplace_back(name, std::move(params));
    } else {
      throw Error(ErrorKind::io, "unexpected token '" + word + "' in checkpoint");
    }
  }
  throw Error(ErrorKind::io, "checkpoint missing end marker");
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path);
  return read_checkpoint(in);
}

}  // namespace s2p
