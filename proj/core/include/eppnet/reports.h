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

// CSV writers and readers. Every table has a fixed header row; doubles are
// written in shortest round-trip form.
//
//   train log     epoch,stage,ce,mclst,sep,total,train_acc,test_acc,mu,nu,
//                 pool_mean,wall_time_s
//   projections   after_epoch,train_acc_before,train_acc_after,prototype,
//                 image,row,col   (one row per projected prototype)
//   accuracy      class,name,count,correct,accuracy   (last row: overall)
//   faithfulness  class,z_k,t_k
//   faith detail  class,image,sign,max_logit
//   pruning       seed,accuracy_before,accuracy_after,delta,remaining_per_class
//   ablation      theta,test_accuracy
//   curves        epoch,mu,nu,pool_mean
//   roughness     series,roughness

#ifndef EPPNET_REPORTS_H_
#define EPPNET_REPORTS_H_

#include <string>
#include <vector>

#include "eppnet/evaluation.h"
#include "eppnet/training.h"

namespace eppnet {

std::string TrainLogCsv(const TrainLog& log);
// Reads the epoch rows back; projection records are not part of this table.
TrainLog ParseTrainLogCsv(const std::string& text);
void WriteTrainLogCsv(const std::string& path, const TrainLog& log);
TrainLog ReadTrainLogCsv(const std::string& path);

std::string ProjectionCsv(const TrainLog& log);
std::string AccuracyCsv(const AccuracyReport& report,
                        const std::vector<std::string>& class_names);
std::string FaithfulnessCsv(const std::vector<ClassFaithfulness>& classes);
std::string FaithfulnessDetailCsv(const std::vector<ClassFaithfulness>& classes);
std::string PruneCsv(const std::vector<PruneRow>& rows);
std::string AblationCsv(const std::vector<AblationRow>& rows);
std::string CurvesCsv(const CurveSamples& samples);
std::string RoughnessCsv(const CurveSamples& samples);

void WriteTextFile(const std::string& path, const std::string& text);

}  // namespace eppnet

#endif  // EPPNET_REPORTS_H_
