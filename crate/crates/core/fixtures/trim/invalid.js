var x = ;
print(1);
