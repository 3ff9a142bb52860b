var t = "hello world";
print(t.indexOf("o"), t.substring(0, 5), t.replace("l+", "L"), t.search("w.r"));
print(Number("0x10"), parseInt("42px"), String(7));
