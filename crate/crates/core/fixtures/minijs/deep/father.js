var n = 12345; var k = n * 2; var m = "quick brown fox".match("fox"); print(m);
