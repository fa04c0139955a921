// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0
