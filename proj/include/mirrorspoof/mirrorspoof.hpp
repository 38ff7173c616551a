#pragma once

#include "mirrorspoof/campaign.hpp"
#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/fitting.hpp"
#include "mirrorspoof/injection.hpp"
#include "mirrorspoof/kv_config.hpp"
#include "mirrorspoof/lidar_sim.hpp"
#include "mirrorspoof/models.hpp"
#include "mirrorspoof/occupancy.hpp"
#include "mirrorspoof/optics.hpp"
#include "mirrorspoof/point_cloud.hpp"
#include "mirrorspoof/registration.hpp"
#include "mirrorspoof/rng.hpp"
#include "mirrorspoof/scenario.hpp"
#include "mirrorspoof/scene_io.hpp"
#include "mirrorspoof/scenes.hpp"
#include "mirrorspoof/segmentation.hpp"
#include "mirrorspoof/spatial_index.hpp"
