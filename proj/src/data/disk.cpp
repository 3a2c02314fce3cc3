// SPDX-License-Identifier: Apache-2.0
#include "data/disk.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "core/csv.hpp"
#include "core/strutil.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace mvsync {

namespace {

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

uint64_t hash_double(double v, uint64_t h) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  return fnv1a_u64(bits, h);
}

std::string frame_name(int t) { return "frame_" + zero_pad(t, 6) + ".png"; }

CameraModel camera_from_json(const json& j) {
  if (!j.contains("R") || !j.contains("t") || !j.contains("f") ||
      !j.contains("cx") || !j.contains("cy"))
    throw StructureError("cameras.json: view entry missing a field");
  CameraModel cam;
  const auto& R = j.at("R");
  const auto& t = j.at("t");
  if (R.size() != 9 || t.size() != 3)
    throw StructureError("cameras.json: R must have 9 entries and t 3");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.R(r, c) = R.at(3 * r + c).get<double>();
  for (int r = 0; r < 3; ++r) cam.t(r) = t.at(r).get<double>();
  cam.f = j.at("f").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.validate();
  return cam;
}

}  // namespace

DiskDataset::DiskDataset(const std::string& root) : root_(root) {
  if (!fs::is_directory(root_))
    throw IoError("load_dataset: no such directory " + root_);
  hash_ = fnv1a("dataset", 0xcbf29ce484222325ULL);

  int pose_state = -1;  // -1 unseen, else 0/1; mixed presence is an error
  int cam_state = -1;
  int bg_state = -1;
  size_t cache_total = 0;

  for (const auto& subject : sorted_subdirs(root_)) {
    for (const auto& action : sorted_subdirs(fs::path(root_) / subject)) {
      fs::path adir = fs::path(root_) / subject / action;
      std::vector<int> views;
      for (const auto& e : fs::directory_iterator(adir)) {
        std::string name = e.path().filename().string();
        if (e.is_directory() && name.rfind("view_", 0) == 0)
          views.push_back(static_cast<int>(parse_int(name.substr(5))));
      }
      std::sort(views.begin(), views.end());
      if (views.empty())
        throw StructureError("load_dataset: (" + subject + ", " + action +
                             ") has no view directories");
      for (int v = 1; v <= views.back(); ++v)
        if (!std::binary_search(views.begin(), views.end(), v))
          throw StructureError("load_dataset: (" + subject + ", " + action +
                               ") is missing view " + format_int(v));

      ExampleInfo ex;
      ex.subject = subject;
      ex.action = action;
      ex.views = views;
      ExampleData data;
      data.views.resize(views.size());

      for (int v : views) {
        ViewData& vd = data.views[v - 1];
        vd.frame_dir = (adir / ("view_" + format_int(v))).string();

        fs::path bpath = adir / ("bboxes_view_" + format_int(v) + ".csv");
        if (!fs::exists(bpath))
          throw StructureError("load_dataset: missing " + bpath.string());
        CsvTable bt = read_csv(bpath.string());
        int tcol = bt.column("t");
        int cxc = bt.column("cx"), cyc = bt.column("cy"), szc = bt.column("size");
        std::vector<int> times;
        for (const auto& row : bt.rows) {
          int t = static_cast<int>(row[tcol]);
          vd.bboxes[t] = {row[cxc], row[cyc], row[szc]};
          times.push_back(t);
        }
        std::sort(times.begin(), times.end());
        if (v == views.front())
          ex.times = times;
        else if (times != ex.times)
          throw StructureError("load_dataset: (" + subject + ", " + action +
                               ") time sets differ between views");

        fs::path ppath = adir / ("poses_view_" + format_int(v) + ".csv");
        bool have_pose = fs::exists(ppath);
        if (pose_state == -1) pose_state = have_pose ? 1 : 0;
        if (have_pose != (pose_state == 1))
          throw StructureError("load_dataset: pose files present for only "
                               "part of the dataset (" + ppath.string() + ")");
        if (have_pose) {
          CsvTable pt = read_csv(ppath.string());
          int ptc = pt.column("t");
          std::array<int, kNumJoints * 3> cols;
          for (int j = 0; j < kNumJoints; ++j) {
            std::string base = "j" + format_int(j);
            cols[3 * j + 0] = pt.column(base + "x");
            cols[3 * j + 1] = pt.column(base + "y");
            cols[3 * j + 2] = pt.column(base + "z");
          }
          for (const auto& row : pt.rows) {
            Pose3D p = make_pose();
            for (int j = 0; j < kNumJoints; ++j)
              p.col(j) = Eigen::Vector3d(row[cols[3 * j]], row[cols[3 * j + 1]],
                                         row[cols[3 * j + 2]]);
            vd.poses[static_cast<int>(row[ptc])] = std::move(p);
          }
          for (int t : ex.times)
            if (!vd.poses.count(t))
              throw StructureError("load_dataset: (" + subject + ", " + action +
                                   ", view " + format_int(v) +
                                   ") has no pose for frame " + format_int(t));
        }

        for (int t : ex.times)
          if (!fs::exists(fs::path(vd.frame_dir) / frame_name(t)))
            throw StructureError("load_dataset: missing frame (" + subject +
                                 ", " + action + ", view " + format_int(v) +
                                 ", t=" + format_int(t) + ")");

        fs::path gpath = adir / ("bg_view_" + format_int(v) + ".png");
        bool have_bg = fs::exists(gpath);
        if (bg_state == -1) bg_state = have_bg ? 1 : 0;
        if (have_bg != (bg_state == 1)) bg_state = 0;  // partial cache: ignore
        vd.bg_path = gpath.string();
      }

      fs::path cpath = adir / "cameras.json";
      bool have_cam = fs::exists(cpath);
      if (cam_state == -1) cam_state = have_cam ? 1 : 0;
      if (have_cam != (cam_state == 1))
        throw StructureError("load_dataset: cameras.json present for only "
                             "part of the dataset (" + cpath.string() + ")");
      if (have_cam) {
        std::ifstream in(cpath);
        json j;
        try {
          j = json::parse(in);
        } catch (const json::exception& e) {
          throw DecodeError("load_dataset: bad cameras.json: " + std::string(e.what()));
        }
        for (int v : views) {
          std::string key = "view_" + format_int(v);
          if (!j.contains(key))
            throw StructureError("load_dataset: cameras.json missing " + key +
                                 " for (" + subject + ", " + action + ")");
          data.views[v - 1].camera = camera_from_json(j.at(key));
        }
      }

      hash_ = fnv1a(subject, hash_);
      hash_ = fnv1a(action, hash_);
      for (int v : views) {
        hash_ = fnv1a_u64(static_cast<uint64_t>(v), hash_);
        const ViewData& vd = data.views[v - 1];
        for (const auto& [t, b] : vd.bboxes) {
          hash_ = fnv1a_u64(static_cast<uint64_t>(t), hash_);
          hash_ = hash_double(b.cx, hash_);
          hash_ = hash_double(b.cy, hash_);
          hash_ = hash_double(b.size, hash_);
        }
        for (const auto& [t, p] : vd.poses)
          for (int j = 0; j < kNumJoints; ++j)
            for (int r = 0; r < 3; ++r) hash_ = hash_double(p(r, j), hash_);
        if (have_cam) {
          const CameraModel& cam = vd.camera;
          for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) hash_ = hash_double(cam.R(r, c), hash_);
          for (int r = 0; r < 3; ++r) hash_ = hash_double(cam.t(r), hash_);
          hash_ = hash_double(cam.f, hash_);
          hash_ = hash_double(cam.cx, hash_);
          hash_ = hash_double(cam.cy, hash_);
        }
      }

      cache_offset_.push_back(cache_total);
      cache_total += views.size() * ex.times.size();
      examples_.push_back(std::move(ex));
      data_.push_back(std::move(data));
    }
  }
  if (examples_.empty())
    throw StructureError("load_dataset: no examples under " + root_);
  has_poses_ = pose_state == 1;
  has_cameras_ = cam_state == 1;
  has_background_ = bg_state == 1;
  frame_cache_.resize(cache_total);
}

const DiskDataset::ViewData& DiskDataset::view_data(size_t example, int view,
                                                    int time) const {
  check_index(example, view, time);
  return data_[example].views[view - 1];
}

Image DiskDataset::full_frame(size_t example, int view, int time) const {
  const ViewData& vd = view_data(example, view, time);
  const auto& times = examples_[example].times;
  size_t tpos = std::lower_bound(times.begin(), times.end(), time) - times.begin();
  size_t slot_ix = cache_offset_[example] +
                   static_cast<size_t>(view - 1) * times.size() + tpos;
  auto& slot = frame_cache_[slot_ix];
  if (!slot.empty()) {
    // Cached planes carry the shape in the first 8 bytes.
    int w, h;
    std::memcpy(&w, slot.data(), 4);
    std::memcpy(&h, slot.data() + 4, 4);
    Image img(w, h);
    float* p = img.data();
    for (size_t i = 0; i < img.size(); ++i) p[i] = slot[8 + i] / 255.0f;
    return img;
  }
  Image img = read_png((fs::path(vd.frame_dir) / frame_name(time)).string());
  slot.resize(8 + img.size());
  int w = img.width(), h = img.height();
  std::memcpy(slot.data(), &w, 4);
  std::memcpy(slot.data() + 4, &h, 4);
  const float* p = img.data();
  for (size_t i = 0; i < img.size(); ++i)
    slot[8 + i] = static_cast<uint8_t>(std::lround(p[i] * 255.0f));
  return img;
}

BBox DiskDataset::bbox(size_t example, int view, int time) const {
  return view_data(example, view, time).bboxes.at(time);
}

Pose3D DiskDataset::pose(size_t example, int view, int time) const {
  if (!has_poses_) throw StructureError("dataset: no pose annotations");
  return view_data(example, view, time).poses.at(time);
}

CameraModel DiskDataset::camera(size_t example, int view) const {
  if (!has_cameras_) throw StructureError("dataset: no camera calibration");
  check_view(example, view);
  return data_[example].views[view - 1].camera;
}

Image DiskDataset::background(size_t example, int view) const {
  if (!has_background_) throw StructureError("dataset: no background cache");
  check_view(example, view);
  return read_png(data_[example].views[view - 1].bg_path);
}

DatasetPtr load_dataset(const std::string& root) {
  return std::make_shared<DiskDataset>(root);
}

void write_dataset(const MultiViewDataset& ds, const std::string& root) {
  for (size_t e = 0; e < ds.examples().size(); ++e) {
    const ExampleInfo& ex = ds.examples()[e];
    fs::path adir = fs::path(root) / ex.subject / ex.action;
    fs::create_directories(adir);

    if (ds.has_cameras()) {
      json cams;
      for (int v : ex.views) {
        CameraModel cam = ds.camera(e, v);
        json jc;
        jc["R"] = json::array();
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) jc["R"].push_back(cam.R(r, c));
        jc["t"] = {cam.t(0), cam.t(1), cam.t(2)};
        jc["f"] = cam.f;
        jc["cx"] = cam.cx;
        jc["cy"] = cam.cy;
        cams["view_" + format_int(v)] = std::move(jc);
      }
      std::ofstream out(adir / "cameras.json");
      if (!out) throw IoError("write_dataset: cannot write cameras.json");
      out << cams.dump(2) << '\n';
    }

    std::vector<std::string> pose_header{"t"};
    for (int j = 0; j < kNumJoints; ++j)
      for (const char* ax : {"x", "y", "z"})
        pose_header.push_back("j" + format_int(j) + ax);

    for (int v : ex.views) {
      CsvWriter bw((adir / ("bboxes_view_" + format_int(v) + ".csv")).string(),
                   {"t", "cx", "cy", "size"});
      for (int t : ex.times) {
        BBox b = ds.bbox(e, v, t);
        bw.row({static_cast<double>(t), b.cx, b.cy, b.size});
      }

      if (ds.has_poses()) {
        CsvWriter pw((adir / ("poses_view_" + format_int(v) + ".csv")).string(),
                     pose_header);
        std::vector<double> row(1 + kNumJoints * 3);
        for (int t : ex.times) {
          Pose3D p = ds.pose(e, v, t);
          row[0] = t;
          for (int j = 0; j < kNumJoints; ++j)
            for (int r = 0; r < 3; ++r) row[1 + 3 * j + r] = p(r, j);
          pw.row(row);
        }
      }

      fs::path vdir = adir / ("view_" + format_int(v));
      for (int t : ex.times)
        write_png((vdir / frame_name(t)).string(), ds.full_frame(e, v, t));
    }
  }
}

}  // namespace mvsync
