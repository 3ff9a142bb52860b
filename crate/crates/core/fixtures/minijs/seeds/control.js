for (var i = 0; i < 3; i) { i = i + 1; if (i == 1) { continue; } print(i); }
try { throw "bad"; } catch (e) { print(e); }
while (false) { break; }
