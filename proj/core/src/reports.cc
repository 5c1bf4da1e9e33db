/*
 * Copyright 2026 The EPPNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "eppnet/reports.h"

#include <sstream>

#include "binary_io.h"
#include "eppnet/error.h"
#include "eppnet/train_config.h"

namespace eppnet {
namespace {

constexpr const char* kTrainLogHeader =
    "epoch,stage,ce,mclst,sep,total,train_acc,test_acc,mu,nu,pool_mean,"
    "wall_time_s";

std::string D(double v) { return FormatDouble(v); }

std::vector<std::string> SplitFields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string TrainLogCsv(const TrainLog& log) {
  std::ostringstream out;
  out << kTrainLogHeader << "\n";
  for (const EpochRecord& r : log.epochs) {
    out << r.epoch << ',' << StageName(r.stage) << ',' << D(r.ce) << ','
        << D(r.cluster) << ',' << D(r.separation) << ',' << D(r.total) << ','
        << D(r.train_accuracy) << ',' << D(r.test_accuracy) << ','
        << D(r.curve.mu) << ',' << D(r.curve.nu) << ',' << D(r.curve.pool_mean)
        << ',' << D(r.wall_seconds) << "\n";
  }
  return out.str();
}

TrainLog ParseTrainLogCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTrainLogHeader) {
    throw Error(ErrorCode::kInvalidArgument, "train log has an unexpected header");
  }
  TrainLog log;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::vector<std::string> f = SplitFields(line);
    if (f.size() != 12) {
      throw Error(ErrorCode::kInvalidArgument,
                  "train log line " + std::to_string(line_number) + " has " +
                      std::to_string(f.size()) + " fields, expected 12");
    }
    EpochRecord r;
    r.epoch = ParseUnsigned("epoch", f[0]);
    r.stage = ParseStage(f[1]);
    r.ce = ParseDouble("ce", f[2]);
    r.cluster = ParseDouble("mclst", f[3]);
    r.separation = ParseDouble("sep", f[4]);
    r.total = ParseDouble("total", f[5]);
    r.train_accuracy = ParseDouble("train_acc", f[6]);
    r.test_accuracy = ParseDouble("test_acc", f[7]);
    r.curve.mu = ParseDouble("mu", f[8]);
    r.curve.nu = ParseDouble("nu", f[9]);
    r.curve.pool_mean = ParseDouble("pool_mean", f[10]);
    r.wall_seconds = ParseDouble("wall_time_s", f[11]);
    if (!log.epochs.empty() && r.epoch <= log.epochs.back().epoch) {
      throw Error(ErrorCode::kInvalidArgument,
                  "train log epochs not strictly increasing at line " +
                      std::to_string(line_number));
    }
    log.epochs.push_back(r);
  }
  return log;
}

void WriteTrainLogCsv(const std::string& path, const TrainLog& log) {
  internal::WriteFile(path, TrainLogCsv(log));
}

TrainLog ReadTrainLogCsv(const std::string& path) {
  return ParseTrainLogCsv(internal::ReadFile(path));
}

std::string ProjectionCsv(const TrainLog& log) {
  std::ostringstream out;
  out << "after_epoch,train_acc_before,train_acc_after,prototype,image,row,col\n";
  for (const ProjectionRecord& p : log.projections) {
    for (const ProjectionSource& s : p.provenance) {
      out << p.after_epoch << ',' << D(p.train_accuracy_before) << ','
          << D(p.train_accuracy_after) << ',' << s.prototype << ','
          << s.image_index << ',' << s.location.row << ',' << s.location.col
          << "\n";
    }
  }
  return out.str();
}

std::string AccuracyCsv(const AccuracyReport& report,
                        const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out << "class,name,count,correct,accuracy\n";
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    if (!report.per_class[k]) continue;
    const std::string name =
        k < class_names.size() ? class_names[k] : "class" + std::to_string(k);
    out << k << ',' << name << ',' << report.class_total[k] << ','
        << report.class_correct[k] << ',' << D(*report.per_class[k]) << "\n";
  }
  out << "overall,all," << report.total << ',' << report.correct << ','
      << D(report.overall) << "\n";
  return out.str();
}

std::string FaithfulnessCsv(const std::vector<ClassFaithfulness>& classes) {
  std::ostringstream out;
  out << "class,z_k,t_k\n";
  for (const ClassFaithfulness& c : classes) {
    out << c.class_index << ',' << c.count << ',' << D(c.score) << "\n";
  }
  return out.str();
}

std::string FaithfulnessDetailCsv(const std::vector<ClassFaithfulness>& classes) {
  std::ostringstream out;
  out << "class,image,sign,max_logit\n";
  for (const ClassFaithfulness& c : classes) {
    for (const FaithfulnessEntry& e : c.entries) {
      out << c.class_index << ',' << e.image << ',' << e.sign << ','
          << D(e.max_logit) << "\n";
    }
  }
  return out.str();
}

std::string PruneCsv(const std::vector<PruneRow>& rows) {
  std::ostringstream out;
  out << "seed,accuracy_before,accuracy_after,delta,remaining_per_class\n";
  for (const PruneRow& r : rows) {
    out << r.seed << ',' << D(r.accuracy_before) << ',' << D(r.accuracy_after)
        << ',' << D(r.delta) << ',';
    for (std::size_t k = 0; k < r.remaining_per_class.size(); ++k) {
      out << (k ? ";" : "") << r.remaining_per_class[k];
    }
    out << "\n";
  }
  return out.str();
}

std::string AblationCsv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "theta,test_accuracy\n";
  for (const AblationRow& r : rows) out << r.theta << ',' << D(r.test_accuracy) << "\n";
  return out.str();
}

std::string CurvesCsv(const CurveSamples& samples) {
  std::ostringstream out;
  out << "epoch,mu,nu,pool_mean\n";
  for (std::size_t i = 0; i < samples.epochs.size(); ++i) {
    out << samples.epochs[i] << ',' << D(samples.mu[i]) << ',' << D(samples.nu[i])
        << ',' << D(samples.pool_mean[i]) << "\n";
  }
  return out.str();
}

std::string RoughnessCsv(const CurveSamples& samples) {
  return "series,roughness\nmu," + D(samples.mu_roughness) + "\nnu," +
         D(samples.nu_roughness) + "\n";
}

void WriteTextFile(const std::string& path, const std::string& text) {
  internal::WriteFile(path, text);
}

}  // namespace eppnet
