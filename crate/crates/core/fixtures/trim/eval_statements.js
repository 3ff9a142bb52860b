try { eval("if (x) else { x; }"); } catch (ex) { }
try { eval("if (y) else { y; }"); } catch (ex) { }
try { eval("if (z) else { z; }"); } catch (ex) { }
try { eval("if (w) else { w; }"); } catch (ex) { }
try { eval("if (q) else { q; }"); } catch (ex) { }
try { eval("if (v) else { v; }"); } catch (ex) { }
try { eval("if (u) else { u; }"); } catch (ex) { }
try { eval("if (r) else { r; }"); } catch (ex) { }
try { eval("if (s) else { s; }"); } catch (ex) { }
try { eval("if (p) else { p; }"); } catch (ex) { }
try { eval("if (o) else { o; }"); } catch (ex) { }
try { eval("if (n) else { n; }"); } catch (ex) { }
try { eval("if (m) else { m; }"); } catch (ex) { }
