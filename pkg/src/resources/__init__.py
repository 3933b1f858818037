﻿""
