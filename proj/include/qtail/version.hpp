#pragma once

#define QTAIL_VERSION "1.0.0"
