/******************************************************************************
 * Copyright 2026 The orbit-splat Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
// Regenerates the bundled capsule_person test asset.
#include <iostream>

#include "osplat/body.hpp"

int main(int argc, char** argv) {
  const std::string out = argc > 1 ? argv[1] : "assets/capsule_person.body";
  osplat::TemplateBody body = osplat::make_capsule_person();
  osplat::save_body(body, out);
  std::cout << "wrote " << out << " (" << body.vertex_count() << " vertices, "
            << body.face_count() << " faces, " << body.joint_count()
            << " joints)\n";
  return 0;
}
